// knobsync: command-line front end for the syncytial clustering library.
// Reads a delimited numeric matrix, runs the k-means phase and the kappa
// merge sweep, and emits a JSON report (optionally plus a 2D SVG scatter).

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "knobsync/data.hpp"
#include "knobsync/eval.hpp"
#include "knobsync/knobsync.hpp"

namespace {

using nlohmann::json;

struct RunConfig {
  std::string input;
  std::string missing_token = "NA";
  std::string scale = "none";
  std::size_t pca = 0;  // 0 = off
  std::size_t kmax = 0; // 0 = auto
  std::string kappa_list = "1,2,3,4,5,inf";
  std::size_t start_cap = 1000;
  std::uint64_t seed = 0;
  std::string trigger = "printed";
  std::string truth_col;
  std::string output;  // empty = stdout
  std::string plot;
};

std::vector<double> parse_kappas(const std::string& list) {
  std::vector<double> kappas;
  std::stringstream ss(list);
  std::string token;
  while (std::getline(ss, token, ',')) {
    std::size_t b = token.find_first_not_of(" \t");
    std::size_t e = token.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    token = token.substr(b, e - b + 1);
    if (token == "inf" || token == "Inf" || token == "INF") {
      kappas.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    char* end = nullptr;
    double v = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size() || !(v > 0.0))
      throw knobsync::error(knobsync::errc::bad_argument,
                            "invalid kappa value '" + token + "'");
    kappas.push_back(v);
  }
  if (kappas.empty())
    throw knobsync::error(knobsync::errc::bad_argument, "kappa list is empty");
  return kappas;
}

json kappa_json(double kappa) {
  if (std::isinf(kappa)) return json("inf");
  return json(kappa);
}

json finite_or_null(double v) {
  if (std::isnan(v)) return json();
  if (std::isinf(v)) return json(v > 0 ? "inf" : "-inf");
  return json(v);
}

// Resolve --truth-col against the parsed table: a header name when a header
// is present, otherwise (or additionally) a 0-based column index.
long resolve_truth_col(const knobsync::RawTable& table, const std::string& spec) {
  if (table.has_header) {
    for (std::size_t j = 0; j < table.header.size(); ++j)
      if (table.header[j] == spec) return static_cast<long>(j);
  }
  char* end = nullptr;
  long idx = std::strtol(spec.c_str(), &end, 10);
  std::size_t width = table.has_header ? table.header.size() : table.cells.front().size();
  if (end == spec.c_str() + spec.size() && idx >= 0 && idx < static_cast<long>(width))
    return idx;
  throw knobsync::error(knobsync::errc::bad_argument,
                        "truth column '" + spec + "' not found");
}

std::vector<int> truth_labels_from_table(const knobsync::RawTable& table, long col) {
  std::vector<int> labels;
  std::map<std::string, int> ids;
  for (const auto& row : table.cells) {
    const std::string& cell = row.at(static_cast<std::size_t>(col));
    auto [it, inserted] = ids.emplace(cell, static_cast<int>(ids.size()));
    labels.push_back(it->second);
  }
  return labels;
}

json trace_to_json(const knobsync::MergeTrace& trace) {
  json iterations = json::array();
  for (const auto& it : trace.iterations) {
    iterations.push_back({{"ell", it.ell},
                          {"k_before", it.k_before},
                          {"k_after", it.k_after},
                          {"omega_max_before", it.omega_max_before},
                          {"omega_gen_before", it.omega_gen_before},
                          {"omega_gen_after", it.omega_gen_after},
                          {"merged_pairs", it.merged_pairs},
                          {"rolled_back", it.rolled_back}});
  }
  return {{"kappa", kappa_json(trace.kappa)},
          {"triggered", trace.triggered},
          {"reason", knobsync::to_string(trace.reason)},
          {"terminal_omega_gen", trace.terminal_omega_gen},
          {"terminal_omega_max", trace.terminal_omega_max},
          {"iterations", iterations}};
}

// Minimal 2D scatter: color encodes the estimated group, marker shape the
// true class (all circles when no truth is given).
void write_svg(const std::string& path, const knobsync::DataMatrix& m,
               const std::vector<int>& groups, const std::vector<int>* truth) {
  static const char* palette[] = {"#e6194b", "#3cb44b", "#4363d8", "#f58231",
                                  "#911eb4", "#42d4f4", "#f032e6", "#bfef45",
                                  "#469990", "#9a6324", "#800000", "#000075",
                                  "#808000", "#fabed4", "#a9a9a9", "#222222"};
  constexpr int kPaletteSize = 16;
  constexpr double kSize = 640.0, kMargin = 40.0, kRadius = 3.0;

  double xmin = m(0, 0), xmax = m(0, 0), ymin = m(0, 1), ymax = m(0, 1);
  for (std::size_t i = 0; i < m.n; ++i) {
    xmin = std::min(xmin, m(i, 0));
    xmax = std::max(xmax, m(i, 0));
    ymin = std::min(ymin, m(i, 1));
    ymax = std::max(ymax, m(i, 1));
  }
  double xspan = xmax > xmin ? xmax - xmin : 1.0;
  double yspan = ymax > ymin ? ymax - ymin : 1.0;
  auto sx = [&](double x) { return kMargin + (x - xmin) / xspan * (kSize - 2 * kMargin); };
  auto sy = [&](double y) { return kSize - kMargin - (y - ymin) / yspan * (kSize - 2 * kMargin); };

  std::ofstream out(path);
  if (!out)
    throw knobsync::error(knobsync::errc::io, "cannot open '" + path + "' for writing");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize
      << "\" height=\"" << kSize << "\" viewBox=\"0 0 " << kSize << " " << kSize
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < m.n; ++i) {
    double cx = sx(m(i, 0)), cy = sy(m(i, 1));
    const char* color = palette[groups[i] % kPaletteSize];
    int shape = truth ? (*truth)[i] % 5 : 0;
    double r = kRadius;
    switch (shape) {
      case 0:
        out << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"" << r
            << "\" fill=\"" << color << "\"/>\n";
        break;
      case 1:
        out << "<rect x=\"" << cx - r << "\" y=\"" << cy - r << "\" width=\"" << 2 * r
            << "\" height=\"" << 2 * r << "\" fill=\"" << color << "\"/>\n";
        break;
      case 2:
        out << "<polygon points=\"" << cx << "," << cy - r << " " << cx - r << ","
            << cy + r << " " << cx + r << "," << cy + r << "\" fill=\"" << color
            << "\"/>\n";
        break;
      case 3:
        out << "<polygon points=\"" << cx << "," << cy - r << " " << cx + r << ","
            << cy << " " << cx << "," << cy + r << " " << cx - r << "," << cy
            << "\" fill=\"" << color << "\"/>\n";
        break;
      default:
        out << "<path d=\"M" << cx - r << " " << cy - r << "L" << cx + r << " "
            << cy + r << "M" << cx - r << " " << cy + r << "L" << cx + r << " "
            << cy - r << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
        break;
    }
  }
  out << "</svg>\n";
}

void emit(const std::string& output, const json& doc) {
  if (output.empty() || output == "-") {
    std::cout << doc.dump(2) << std::endl;
    return;
  }
  std::ofstream out(output);
  if (!out)
    throw knobsync::error(knobsync::errc::io, "cannot open '" + output + "' for writing");
  out << doc.dump(2) << std::endl;
}

int run(const RunConfig& cfg) {
  knobsync::RawTable table = knobsync::read_delimited(cfg.input, cfg.missing_token, true);

  long truth_idx = -1;
  std::vector<int> truth;
  if (!cfg.truth_col.empty()) {
    truth_idx = resolve_truth_col(table, cfg.truth_col);
    truth = truth_labels_from_table(table, truth_idx);
  }
  knobsync::DataMatrix m =
      knobsync::matrix_from_table(table, cfg.missing_token, truth_idx);

  std::size_t missing_cells = 0;
  for (auto v : m.mask) missing_cells += v == 0;

  bool recommend = knobsync::scaling_recommended(m);
  if (recommend && cfg.scale == "none")
    std::cerr << "note: feature scales differ by more than 4x; consider --scale sd\n";

  if (cfg.scale == "sd")
    m = knobsync::standardize(m, knobsync::ScaleMode::per_feature_sd).first;

  if (cfg.pca > 0) m = knobsync::pca_project(m, cfg.pca);

  knobsync::KnobSyncConfig config;
  config.phase.k_max = cfg.kmax;
  config.phase.start_cap = cfg.start_cap;
  config.kappas = parse_kappas(cfg.kappa_list);
  config.trigger = cfg.trigger == "transposed" ? knobsync::TriggerVariant::transposed
                                               : knobsync::TriggerVariant::printed;

  knobsync::KnobSyncResult result = knobsync::run_knobsync(m, config, cfg.seed);
  const knobsync::MergeTrace& winner = result.traces[result.best_trace];

  json curve = json::array();
  for (std::size_t k = 1; k <= result.curve.k_max; ++k)
    curve.push_back({{"k", k},
                     {"wss", result.curve.wss[k - 1]},
                     {"criterion", finite_or_null(result.criterion[k - 1])}});

  json groups = json::array();
  for (const auto& g : result.forest.groups) groups.push_back(g);

  json matrix = json::array();
  for (std::size_t r = 0; r < result.final_matrix.K; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < result.final_matrix.K; ++c)
      row.push_back(result.final_matrix.at(r, c));
    matrix.push_back(row);
  }

  std::vector<std::size_t> sizes(result.n_clusters, 0);
  for (int l : result.labels) ++sizes[static_cast<std::size_t>(l)];

  json traces = json::array();
  for (const auto& t : result.traces) traces.push_back(trace_to_json(t));

  json doc{
      {"schema", 1},
      {"input",
       {{"path", cfg.input},
        {"n", m.n},
        {"p", m.p},
        {"missing_cells", missing_cells},
        {"scale", cfg.scale},
        {"scaling_recommended", recommend},
        {"seed", cfg.seed}}},
      {"kmeans",
       {{"k_hat", result.kmeans_partition.K},
        {"wss", result.kmeans_partition.wss},
        {"selector", result.selector == knobsync::KSelector::jump ? "jump" : "kl"},
        {"jump_y", result.jump_y},
        {"sub_cluster_sizes", result.kmeans_partition.counts()},
        {"curve", curve}}},
      {"cdf",
       {{"bandwidth", result.cdf.bandwidth},
        {"bandwidth_fallback", result.cdf.bandwidth_fallback},
        {"gamma_shape", finite_or_null(result.cdf.gamma_shape)},
        {"gamma_scale", finite_or_null(result.cdf.gamma_scale)}}},
      {"overlap",
       {{"initial_omega_gen", result.initial_omega_gen},
        {"initial_omega_max", result.initial_omega_max}}},
      {"traces", traces},
      {"result",
       {{"n_clusters", result.n_clusters},
        {"kappa", kappa_json(config.kappas[result.best_trace])},
        {"reason", knobsync::to_string(winner.reason)},
        {"terminal_omega_gen", winner.terminal_omega_gen},
        {"terminal_omega_max", winner.terminal_omega_max},
        {"cluster_sizes", sizes},
        {"groups", groups},
        {"final_overlap_matrix", matrix},
        {"labels", result.labels}}}};
  if (cfg.pca > 0) doc["input"]["pca_components"] = cfg.pca;

  if (!truth.empty()) {
    knobsync::Contingency table2 = knobsync::confusion_matrix(truth, result.labels);
    json counts = json::array();
    for (std::size_t r = 0; r < table2.rows; ++r) {
      json row = json::array();
      for (std::size_t c = 0; c < table2.cols; ++c) row.push_back(table2.at(r, c));
      counts.push_back(row);
    }
    doc["evaluation"] = {{"ari", knobsync::adjusted_rand_index(truth, result.labels)},
                         {"confusion",
                          {{"true_labels", table2.row_labels},
                           {"estimated_labels", table2.col_labels},
                           {"counts", counts}}}};
  }

  if (!cfg.plot.empty()) {
    if (m.p == 2 && m.fully_observed()) {
      write_svg(cfg.plot, m, result.labels, truth.empty() ? nullptr : &truth);
      doc["plot"] = cfg.plot;
    } else {
      std::cerr << "note: plotting needs fully observed 2D data (have p=" << m.p
                << "); skipping SVG\n";
    }
  }

  emit(cfg.output, doc);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{"Syncytial clustering: k-means sub-clusters merged by overlap"};
  app.add_option("--input", cfg.input, "Input delimited matrix (CSV/TSV)")->required();
  app.add_option("--missing-token", cfg.missing_token, "Token marking missing cells");
  app.add_option("--scale", cfg.scale, "Feature scaling: none or sd")
      ->check(CLI::IsMember({"none", "sd"}));
  app.add_option("--pca", cfg.pca, "Project onto the first N principal components");
  app.add_option("--kmax", cfg.kmax, "Largest K for the k-means phase (0 = auto)");
  app.add_option("--kappa", cfg.kappa_list, "Comma-separated kappa sweep (inf allowed)");
  app.add_option("--start-cap", cfg.start_cap, "Cap on k-means starts per K");
  app.add_option("--seed", cfg.seed, "RNG seed");
  app.add_option("--trigger", cfg.trigger, "Merge trigger form: printed or transposed")
      ->check(CLI::IsMember({"printed", "transposed"}));
  app.add_option("--truth-col", cfg.truth_col,
                 "Column (name or 0-based index) holding true labels");
  app.add_option("--output", cfg.output, "Output JSON path (default stdout)");
  app.add_option("--plot", cfg.plot, "SVG scatter output path (2D data only)");
  CLI11_PARSE(app, argc, argv);

  try {
    return run(cfg);
  } catch (const knobsync::error& e) {
    json err{{"schema", 1}, {"error", {{"code", e.code()}, {"message", e.what()}}}};
    try {
      emit(cfg.output, err);
    } catch (...) {
      std::cout << err.dump(2) << std::endl;
    }
    return 1;
  } catch (const std::exception& e) {
    json err{{"schema", 1}, {"error", {{"code", "internal_error"}, {"message", e.what()}}}};
    std::cout << err.dump(2) << std::endl;
    return 1;
  }
}
