#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "oamtopo/binio.hpp"
#include "oamtopo/pipeline.hpp"
#include "oamtopo/rng.hpp"

namespace oamtopo {

namespace {

std::string fmt_level(double t) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

std::string cell_name(int n, double t, std::uint64_t seed) {
  return "n" + std::to_string(n) + "_T" + fmt_level(t) + "_s" + std::to_string(seed) + ".done";
}

// The sweep grid itself is not part of a cell's identity; everything else is.
std::string cell_config_hash(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.sweep = SweepConfig{};
  c.jobs = 0;
  return c.hash();
}

std::string marker_text(const std::string& config_hash, const std::vector<SweepRow>& rows) {
  std::string body = "config=" + config_hash + "\n";
  for (const auto& r : rows) body += format_sweep_row(r) + "\n";
  return body + "checksum=" + hex64(fnv1a(body)) + "\n";
}

std::vector<SweepRow> read_marker(const std::filesystem::path& path, const std::string& config_hash) {
  const std::string text = read_text(path);
  const auto pos = text.rfind("checksum=");
  if (pos == std::string::npos || text.substr(pos) != "checksum=" + hex64(fnv1a(text.substr(0, pos))) + "\n")
    throw std::runtime_error("corrupt sweep cell marker " + path.string() + " (checksum mismatch); delete it to rerun the cell");
  const std::string body = text.substr(0, pos);
  const std::string head = "config=" + config_hash + "\n";
  if (body.compare(0, head.size(), head) != 0)
    throw std::runtime_error("sweep cell marker " + path.string() +
                             " was produced by a different configuration; use a fresh output path");
  return parse_sweep_csv(std::string(kSweepHeader) + "\n" + body.substr(head.size()));
}

}  // namespace

std::string format_sweep_row(const SweepRow& row) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s,%d,%s,%llu,%.6f,%.6f", row.model.c_str(), row.n_bits, fmt_level(row.turbulence).c_str(),
                static_cast<unsigned long long>(row.seed), row.accuracy, 1.0 - row.accuracy);
  return buf;
}

std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kSweepHeader) throw std::runtime_error("sweep CSV header mismatch");
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw std::runtime_error("malformed sweep CSV row: " + line);
    SweepRow r;
    r.model = f[0];
    r.n_bits = std::stoi(f[1]);
    r.turbulence = std::stod(f[2]);
    r.seed = std::stoull(f[3]);
    r.accuracy = std::stod(f[4]);
    rows.push_back(r);
  }
  return rows;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const std::filesystem::path& out,
                                const std::function<void(const std::string&)>& log) {
  config.validate();
  const std::filesystem::path cells = out.string() + ".cells";
  std::filesystem::create_directories(cells);
  const std::string config_hash = cell_config_hash(config);
  std::vector<SweepRow> all;

  for (int n : config.sweep.bits)
    for (double t : config.sweep.turbulence)
      for (std::uint64_t seed : config.sweep.seeds) {
        const auto marker = cells / cell_name(n, t, seed);
        std::vector<SweepRow> rows;
        if (std::filesystem::exists(marker)) {
          rows = read_marker(marker, config_hash);
          if (log) log("cell n=" + std::to_string(n) + " T=" + fmt_level(t) + " seed=" + std::to_string(seed) + " already done");
        } else {
          ExperimentConfig cell = config;
          cell.n_bits = n;
          cell.charges.clear();
          cell.turbulence = t;
          // one master seed per sweep seed: every T and n level sees the same per-sample screens
          cell.seed = seed;
          const Dataset ds = generate_dataset(cell);
          const Split sp = split_dataset(ds, cell.split_ratio, seed);
          const auto diagrams = compute_diagrams(ds, cell.filtration, cell.grid.extent, cell.jobs);
          for (ModelKind kind : {ModelKind::cnn, ModelKind::ph_cnn}) {
            cell.train.seed = seed_hash({seed, static_cast<std::uint64_t>(kind)});
            const TrainedModel tm = train_model(kind, ds, sp.train, &diagrams, cell);
            const EvalReport rep = evaluate(tm.model, ds, sp.test, &diagrams);
            rows.push_back({to_string(kind), n, t, seed, rep.accuracy});
            if (log) log(format_sweep_row(rows.back()));
          }
          atomic_write(marker, marker_text(config_hash, rows));
        }
        all.insert(all.end(), rows.begin(), rows.end());
        std::string csv = std::string(kSweepHeader) + "\n";
        for (const auto& r : all) csv += format_sweep_row(r) + "\n";
        atomic_write(out, csv);
      }
  return all;
}

}  // namespace oamtopo
