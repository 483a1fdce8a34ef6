//
// Copyright 2026 The PCM Authors
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
//

// Result tables, line plots and CSR word-list reports.

#ifndef PCM_REPORT_H_
#define PCM_REPORT_H_

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pcm/csr_types.h"
#include "pcm/experiments.h"

namespace pcm {

// "mean±sem" with two decimals, "mean" when no S.E.M. exists, "—" when the
// cell is missing.
std::string FormatCell(const std::optional<RunResult>& result);

// Markdown grid: one row per method, one column per labels-per-class value.
std::string RenderResultGrid(const std::vector<RunResult>& results);

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

std::string RenderLinePlotSvg(const std::string& title, const std::string& x_label, const std::string& y_label,
                              const std::vector<PlotSeries>& series);

// Accuracy against unlabeled pool size, one series per method.
std::vector<PlotSeries> SweepSeries(const std::vector<RunResult>& results);

// Markdown table juxtaposing the initial and final word lists of every class.
std::string RenderCsrBeforeAfter(const CsrSet& initial, const CsrSet& final_csr, int max_words = 20);

// Writes grid.md, sweep.svg (when any result has a pool cap) and, for each
// CSR pair, csr_<name>.md into `dir`.
void WriteReport(const std::string& dir, const std::vector<RunResult>& results,
                 const std::vector<std::pair<std::string, std::pair<CsrSet, CsrSet>>>& csr_pairs = {});

}  // namespace pcm

#endif  // PCM_REPORT_H_
