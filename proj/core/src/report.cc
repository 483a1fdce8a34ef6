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

#include "pcm/report.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace pcm {
namespace {

std::string Fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string WordList(const ClassSemanticRepresentation& cls, int max_words) {
  std::string out;
  for (int i = 0; i < static_cast<int>(cls.words.size()) && i < max_words; ++i) {
    out += (i ? ", " : "") + cls.words[static_cast<std::size_t>(i)].word;
  }
  return out.empty() ? "—" : out;
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

std::string FormatCell(const std::optional<RunResult>& result) {
  if (!result || result->seeds.empty()) return "—";
  std::string cell = Fixed2(result->mean);
  if (result->sem) cell += "±" + Fixed2(*result->sem);
  if (result->incomplete) cell += "*";
  return cell;
}

std::string RenderResultGrid(const std::vector<RunResult>& results) {
  std::vector<std::string> methods;
  std::set<int> columns;
  std::map<std::pair<std::string, int>, RunResult> cells;
  for (const auto& r : results) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    columns.insert(r.n_per_class);
    cells[{r.method, r.n_per_class}] = r;
  }
  std::ostringstream out;
  out << "| method |";
  for (int n : columns) out << ' ' << n << " labels/class |";
  out << "\n|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) out << "---|";
  out << '\n';
  for (const auto& m : methods) {
    out << "| " << m << " |";
    for (int n : columns) {
      auto it = cells.find({m, n});
      out << ' ' << FormatCell(it == cells.end() ? std::nullopt : std::optional<RunResult>(it->second)) << " |";
    }
    out << '\n';
  }
  return out.str();
}

std::string RenderLinePlotSvg(const std::string& title, const std::string& x_label, const std::string& y_label,
                              const std::vector<PlotSeries>& series) {
  constexpr double kWidth = 640, kHeight = 400, kLeft = 70, kRight = 150, kTop = 40, kBottom = 60;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  bool first = true;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (first) {
        x_min = x_max = x;
        y_min = y_max = y;
        first = false;
      }
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  if (x_max == x_min) x_max = x_min + 1;
  if (y_max == y_min) y_max = y_min + 1;
  const double pad = 0.05 * (y_max - y_min);
  y_min -= pad;
  y_max += pad;
  const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * plot_w; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << Escape(title)
      << "</text>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w << "\" y2=\""
      << kTop + plot_h << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + plot_h
      << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x_min + (x_max - x_min) * i / 4.0;
    const double yv = y_min + (y_max - y_min) * i / 4.0;
    out << "<text x=\"" << px(xv) << "\" y=\"" << kTop + plot_h + 18 << "\" text-anchor=\"middle\">" << Fixed2(xv)
        << "</text>\n";
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << Fixed2(yv)
        << "</text>\n";
  }
  out << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 15 << "\" text-anchor=\"middle\">"
      << Escape(x_label) << "</text>\n";
  out << "<text x=\"18\" y=\"" << kTop + plot_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << kTop + plot_h / 2 << ")\">" << Escape(y_label) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % std::size(kColors)];
    const auto& s = series[i];
    if (!s.points.empty()) {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (const auto& [x, y] : s.points) out << px(x) << ',' << py(y) << ' ';
      out << "\"/>\n";
      for (const auto& [x, y] : s.points) {
        out << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
      }
    }
    const double ly = kTop + 16.0 * static_cast<double>(i);
    out << "<line x1=\"" << kWidth - kRight + 10 << "\" y1=\"" << ly << "\" x2=\"" << kWidth - kRight + 30
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << kWidth - kRight + 35 << "\" y=\"" << ly + 4 << "\">" << Escape(s.name) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::vector<PlotSeries> SweepSeries(const std::vector<RunResult>& results) {
  std::vector<PlotSeries> out;
  for (const auto& r : results) {
    if (r.pool_cap <= 0 || r.seeds.empty()) continue;
    auto it = std::find_if(out.begin(), out.end(), [&](const PlotSeries& s) { return s.name == r.method; });
    if (it == out.end()) {
      out.push_back({r.method, {}});
      it = out.end() - 1;
    }
    it->points.emplace_back(static_cast<double>(r.pool_cap), r.mean);
  }
  for (auto& s : out) std::sort(s.points.begin(), s.points.end());
  return out;
}

std::string RenderCsrBeforeAfter(const CsrSet& initial, const CsrSet& final_csr, int max_words) {
  std::ostringstream out;
  out << "| class | version " << initial.version << " (initial) | version " << final_csr.version << " (final) |\n";
  out << "|---|---|---|\n";
  const int k = std::max(initial.num_classes(), final_csr.num_classes());
  for (int c = 0; c < k; ++c) {
    const auto cell = [&](const CsrSet& s) {
      return c < s.num_classes() ? WordList(s.classes[static_cast<std::size_t>(c)], max_words) : std::string("—");
    };
    out << "| " << c << " | " << cell(initial) << " | " << cell(final_csr) << " |\n";
  }
  return out.str();
}

void WriteReport(const std::string& dir, const std::vector<RunResult>& results,
                 const std::vector<std::pair<std::string, std::pair<CsrSet, CsrSet>>>& csr_pairs) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  WriteText(fs::path(dir) / "grid.md", RenderResultGrid(results));
  const std::vector<PlotSeries> sweep = SweepSeries(results);
  if (!sweep.empty()) {
    WriteText(fs::path(dir) / "sweep.svg",
              RenderLinePlotSvg("accuracy vs unlabeled pool", "unlabeled pool size", "test accuracy (%)", sweep));
  }
  for (const auto& [name, pair] : csr_pairs) {
    WriteText(fs::path(dir) / ("csr_" + name + ".md"), RenderCsrBeforeAfter(pair.first, pair.second));
  }
}

}  // namespace pcm
