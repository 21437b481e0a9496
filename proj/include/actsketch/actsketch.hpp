#pragma once

#include <actsketch/activation_io.hpp>
#include <actsketch/bench.hpp>
#include <actsketch/error.hpp>
#include <actsketch/parallel.hpp>
#include <actsketch/pvalue.hpp>
#include <actsketch/scan.hpp>
#include <actsketch/sketch.hpp>
#include <actsketch/stats.hpp>
