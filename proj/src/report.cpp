#include "fedunlearn/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace fedunlearn {
namespace {

double parse_number(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw std::invalid_argument("metrics: bad number '" + s + "'");
  return v;
}

std::string optional_cell(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string metrics_to_csv(const std::vector<MetricsRecord>& records) {
  std::string out = std::string(kMetricsCsvHeader) + "\n";
  for (const auto& r : records) {
    out += std::string(to_string(r.phase)) + "," + std::to_string(r.round) + "," + format_number(r.clean_acc) + "," +
           format_number(r.backdoor_acc) + "," + std::to_string(r.updates) + "," + format_number(r.seconds) + "\n";
  }
  return out;
}

std::vector<MetricsRecord> metrics_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsCsvHeader) throw std::invalid_argument("metrics: missing CSV header");
  std::vector<MetricsRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw std::invalid_argument("metrics: expected 6 CSV fields in '" + line + "'");
    MetricsRecord r;
    r.phase = parse_phase(cells[0]);
    r.round = std::stoi(cells[1]);
    r.clean_acc = parse_number(cells[2]);
    r.backdoor_acc = parse_number(cells[3]);
    r.updates = std::stoll(cells[4]);
    r.seconds = parse_number(cells[5]);
    out.push_back(r);
  }
  return out;
}

std::string metrics_to_jsonl(const std::vector<MetricsRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["phase"] = to_string(r.phase);
    j["round"] = r.round;
    // NaN has no JSON form; null marks a missing measurement.
    j["clean_acc"] = std::isnan(r.clean_acc) ? nlohmann::ordered_json() : nlohmann::ordered_json(r.clean_acc);
    j["backdoor_acc"] = std::isnan(r.backdoor_acc) ? nlohmann::ordered_json() : nlohmann::ordered_json(r.backdoor_acc);
    j["updates"] = r.updates;
    j["seconds"] = r.seconds;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<MetricsRecord> metrics_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<MetricsRecord> out;
  auto number = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    MetricsRecord r;
    r.phase = parse_phase(j.at("phase").get<std::string>());
    r.round = j.at("round").get<int>();
    r.clean_acc = number(j.at("clean_acc"));
    r.backdoor_acc = number(j.at("backdoor_acc"));
    r.updates = j.at("updates").get<std::int64_t>();
    r.seconds = j.at("seconds").get<double>();
    out.push_back(r);
  }
  return out;
}

void export_metrics(const std::vector<MetricsRecord>& records, MetricsFormat format, const std::filesystem::path& path) {
  if (records.empty()) throw std::invalid_argument("export_metrics: no records");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("export_metrics: cannot write " + path.string());
  out << (format == MetricsFormat::csv ? metrics_to_csv(records) : metrics_to_jsonl(records));
  if (!out) throw std::runtime_error("export_metrics: write failed for " + path.string());
}

std::string recovery_to_csv(const RecoveryComparison& comparison) {
  std::string out = "round,unlearn_clean,unlearn_backdoor,retrain_clean,retrain_backdoor,clean_gap\n";
  for (const auto& r : comparison.rows) {
    out += std::to_string(r.round) + "," + optional_cell(r.unlearn_clean) + "," + optional_cell(r.unlearn_backdoor) +
           "," + optional_cell(r.retrain_clean) + "," + optional_cell(r.retrain_backdoor) + "," +
           optional_cell(r.clean_gap) + "\n";
  }
  return out;
}

std::string format_accuracy_table(const std::vector<AccuracyPair>& row, int num_clients) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << std::setw(4) << "N";
  for (const auto& p : row) os << " | " << std::setw(24) << p.role;
  os << "\n" << std::setw(4) << "";
  for (std::size_t i = 0; i < row.size(); ++i) os << " | " << std::setw(11) << "Clean" << " " << std::setw(12) << "Backdoor";
  os << "\n" << std::setw(4) << num_clients;
  for (const auto& p : row) {
    os << " | " << std::setw(11) << 100.0 * p.clean << " " << std::setw(12) << 100.0 * p.backdoor;
  }
  os << "\n";
  return os.str();
}

}  // namespace fedunlearn
