#include "iamseq/explain.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "iamseq/attention.hpp"
#include "iamseq/errors.hpp"
#include "iamseq/loss.hpp"

namespace iamseq {

namespace {

constexpr std::size_t kCellsPerRow = 13;
constexpr int kCell = 40;

std::string class_stem(int cls) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "class_%02d", cls);
  return buf;
}

std::string fill_color(double t) {
  // white -> #b40426
  t = std::clamp(t, 0.0, 1.0);
  const auto channel = [t](int hi) {
    return static_cast<int>(255.0 + (hi - 255.0) * t + 0.5);
  };
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", channel(0xb4), channel(0x04),
                channel(0x26));
  return buf;
}

}  // namespace

std::vector<std::size_t> top_k_indices(std::span<const double> values,
                                       std::size_t k) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return values[a] > values[b];
  });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

CauseReport explain(IamBiLstmClassifier& model, std::span<const Window> windows,
                    std::size_t top_k, bool correct_only, std::size_t batch_size) {
  if (windows.empty()) throw ContractError("explain: no windows");
  if (top_k == 0) throw ParameterError("explain: top_k must be positive");
  const std::size_t classes = model.config().num_classes;
  const std::size_t features = model.config().num_features;
  NoGradGuard no_grad;

  std::vector<std::vector<double>> sums(classes, std::vector<double>(features, 0.0));
  std::vector<std::size_t> counts(classes, 0);
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t len = std::min(batch_size, order.size() - start);
    SequenceBatch batch =
        gather_batch(windows, std::span<const std::size_t>(order.data() + start, len));
    ForwardResult out = model.forward(batch.inputs, Mode::Eval);
    const auto pred = argmax_rows(out.logits);
    const std::size_t per_sample = features * features;
    auto w = out.attn_in.data();
    for (std::size_t b = 0; b < len; ++b) {
      const int truth = batch.labels[b];
      if (truth < 0 || static_cast<std::size_t>(truth) >= classes) {
        throw ContractError("explain: label " + std::to_string(truth) +
                            " out of range");
      }
      if (correct_only && pred[b] != truth) continue;
      Tensor one = Tensor::from(
          {1, features, features},
          std::vector<double>(w.begin() + static_cast<std::ptrdiff_t>(b * per_sample),
                              w.begin() + static_cast<std::ptrdiff_t>((b + 1) * per_sample)));
      const auto profile = importance_profile(one);
      auto& acc = sums[static_cast<std::size_t>(truth)];
      for (std::size_t f = 0; f < features; ++f) acc[f] += profile[f];
      ++counts[static_cast<std::size_t>(truth)];
    }
  }

  CauseReport report;
  report.num_features = features;
  report.top_k = top_k;
  report.correct_only = correct_only;
  for (std::size_t c = 0; c < classes; ++c) {
    ClassCause cause;
    cause.cls = static_cast<int>(c);
    cause.windows_used = counts[c];
    if (counts[c] > 0) {
      std::vector<double> profile = sums[c];
      for (double& v : profile) v /= static_cast<double>(counts[c]);
      cause.top_features = top_k_indices(profile, top_k);
      cause.importance = std::move(profile);
    }
    report.classes.push_back(std::move(cause));
  }
  return report;
}

std::string render_heatmap_svg(std::span<const double> importance,
                               const std::string& title) {
  const std::size_t n = importance.size();
  const std::size_t rows = (n + kCellsPerRow - 1) / kCellsPerRow;
  const int width = static_cast<int>(kCellsPerRow) * kCell + 20;
  const int height = static_cast<int>(rows) * kCell + 70;
  const auto [lo_it, hi_it] = std::minmax_element(importance.begin(), importance.end());
  const double lo = n ? *lo_it : 0.0;
  const double hi = n ? *hi_it : 0.0;
  const double span = hi > lo ? hi - lo : 1.0;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" font-family=\"sans-serif\">\n";
  svg << "  <text x=\"10\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
  char buf[64];
  for (std::size_t i = 0; i < n; ++i) {
    const int x = 10 + static_cast<int>(i % kCellsPerRow) * kCell;
    const int y = 30 + static_cast<int>(i / kCellsPerRow) * kCell;
    std::snprintf(buf, sizeof buf, "%.6g", importance[i]);
    svg << "  <g><title>feature " << i << ": " << buf << "</title>"
        << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << kCell
        << "\" height=\"" << kCell << "\" fill=\""
        << fill_color((importance[i] - lo) / span)
        << "\" stroke=\"#999\"/><text x=\"" << x + kCell / 2 << "\" y=\""
        << y + kCell / 2 + 4 << "\" font-size=\"11\" text-anchor=\"middle\">" << i
        << "</text></g>\n";
  }
  const int legend_y = 30 + static_cast<int>(rows) * kCell + 18;
  std::snprintf(buf, sizeof buf, "%.4g", lo);
  svg << "  <text x=\"10\" y=\"" << legend_y << "\" font-size=\"11\">min " << buf;
  std::snprintf(buf, sizeof buf, "%.4g", hi);
  svg << " (white) .. max " << buf << " (#b40426)</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

void write_cause_report(const std::filesystem::path& dir,
                        const CauseReport& report) {
  std::filesystem::create_directories(dir);
  std::ofstream summary(dir / "summary.csv", std::ios::trunc);
  if (!summary) throw IoError("cannot write " + (dir / "summary.csv").string());
  summary << "class,windows,status,top_features\n";
  char buf[64];
  for (const auto& cause : report.classes) {
    summary << cause.cls << ',' << cause.windows_used << ',';
    if (!cause.importance) {
      summary << "omitted_no_windows,\n";
      continue;
    }
    summary << "ok,";
    for (std::size_t i = 0; i < cause.top_features.size(); ++i) {
      summary << (i ? " " : "") << cause.top_features[i];
    }
    summary << '\n';

    const auto& profile = *cause.importance;
    const auto ranking = top_k_indices(profile, profile.size());
    std::vector<std::size_t> rank(profile.size());
    for (std::size_t r = 0; r < ranking.size(); ++r) rank[ranking[r]] = r + 1;
    const std::string stem = class_stem(cause.cls);
    std::ofstream csv(dir / (stem + ".csv"), std::ios::trunc);
    if (!csv) throw IoError("cannot write " + (dir / (stem + ".csv")).string());
    csv << "feature,importance,rank\n";
    for (std::size_t f = 0; f < profile.size(); ++f) {
      std::snprintf(buf, sizeof buf, "%.17g", profile[f]);
      csv << f << ',' << buf << ',' << rank[f] << '\n';
    }
    std::ofstream svg(dir / (stem + ".svg"), std::ios::trunc);
    if (!svg) throw IoError("cannot write " + (dir / (stem + ".svg")).string());
    svg << render_heatmap_svg(profile, "class " + std::to_string(cause.cls) +
                                           " input attention importance");
  }
}

}  // namespace iamseq
