#pragma once

#include "fpp/continuous.hpp"
#include "fpp/lattice.hpp"
#include "fpp/measure.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace fpp {

// "[0,1]x[0,1/2]"; "{a}" is the degenerate interval [a,a]. Whitespace is ignored.
RBox parse_box(const std::string& text);
// Boxes separated by ';'.
std::vector<RBox> parse_boxes(const std::string& text);
std::string format_box(const RBox& b);

// {"d": 2, "atoms": [{"point": ["1/4", "0"], "weight": [0.5, 0]}],
//  "densities": [{"lo": ["0", "0"], "hi": ["1", "1"], "value": [1, 0]}]}
// Coordinates are exact rationals written as strings; weights and values are numbers.
nlohmann::json measure_to_json(const VectorMeasure& m);
VectorMeasure measure_from_json(const nlohmann::json& j);

// {"d": 2, "M": "1", "cells": [{"lo": [...], "hi": [...], "value": ["1", "0"]}]}
nlohmann::json field_to_json(const ContinuousField& f);
ContinuousField field_from_json(const nlohmann::json& j);

}  // namespace fpp
