// Copyright 2026 The cnodsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cnod/hilbert.hpp"

namespace cnod {

// Binary state file: text header (dims, kind, '#' metadata lines) followed by little-endian doubles.
void save_state(const State &state, const std::string &path, const std::vector<std::string> &meta = {});
State load_state(const std::string &path);
// Metadata lines stored in a state file header.
std::vector<std::string> state_metadata(const std::string &path);

// Plots are a convenience layer; numeric outputs never depend on them.
// Metadata pairs are stored as PNG tEXt chunks.
using PngMeta = std::vector<std::pair<std::string, std::string>>;

// Diverging colormap over [-vmax, vmax] (vmax <= 0: symmetric auto range). Row 0 at the top.
void write_heatmap_png(const std::string &path, const RMat &values, double vmax = 0.0, const PngMeta &meta = {});

struct PlotSeries {
    std::vector<double> x, y;
};

// Line plot of one or more series with a shared auto range and a zero line.
void write_lines_png(const std::string &path, const std::vector<PlotSeries> &series, const PngMeta &meta = {});

}  // namespace cnod
