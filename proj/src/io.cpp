#include "nqs/io.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace nqs {

namespace {

LogLevel g_level = LogLevel::info;

const char* level_name(LogLevel level) {
  switch (level) {
    case LogLevel::error: return "error";
    case LogLevel::warn: return "warn";
    case LogLevel::info: return "info";
    case LogLevel::debug: return "debug";
  }
  return "?";
}

}  // namespace

void set_log_level(LogLevel level) { g_level = level; }
LogLevel log_level() { return g_level; }

LogLevel parse_log_level(const std::string& name) {
  if (name == "error") return LogLevel::error;
  if (name == "warn" || name == "warning") return LogLevel::warn;
  if (name == "info") return LogLevel::info;
  if (name == "debug") return LogLevel::debug;
  throw std::invalid_argument("unknown log level: " + name);
}

void log_message(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) > static_cast<int>(g_level)) return;
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::duration_cast<std::chrono::duration<double>>(
                        now.time_since_epoch())
                        .count();
  std::fprintf(stderr, "[%013.3f] %-5s %s\n", secs, level_name(level), msg.c_str());
}

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path,
                     const std::vector<std::string>& columns)
    : out_(path, std::ios::binary), n_cols_(columns.size()) {
  if (!out_) throw IoError("cannot open for writing: " + path.string());
  write_row(columns);
}

std::string CsvWriter::escape(const std::string& cell) {
  if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
  std::string quoted = "\"";
  for (char ch : cell) {
    quoted += ch;
    if (ch == '"') quoted += '"';
  }
  quoted += '"';
  return quoted;
}

void CsvWriter::write_row(const std::vector<std::string>& cells) {
  if (cells.size() != n_cols_)
    throw std::invalid_argument("csv row has " + std::to_string(cells.size()) +
                                " cells, expected " + std::to_string(n_cols_));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) out_ << ',';
    out_ << escape(cells[i]);
  }
  out_ << "\r\n";
  if (!out_) throw IoError("csv write failed");
}

void append_jsonl(const std::filesystem::path& path, const nlohmann::json& record) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot open for appending: " + path.string());
  out << record.dump() << '\n';
  if (!out) throw IoError("jsonl write failed: " + path.string());
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& value) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << value.dump(2) << '\n';
  if (!out) throw IoError("json write failed: " + path.string());
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  nlohmann::json value;
  try {
    in >> value;
  } catch (const nlohmann::json::parse_error& err) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + err.what());
  }
  return value;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void save_checkpoint(const std::filesystem::path& path,
                     const CheckpointHeader& header,
                     const Eigen::VectorXd& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  const bool rbm_like = header.architecture.rfind("rbm", 0) == 0;
  out << "nqsdyn-checkpoint 1\n";
  out << "architecture " << header.architecture << '\n';
  out << (rbm_like ? "alpha " : "hidden ") << header.hidden << '\n';
  out << "rows " << header.rows << '\n';
  out << "cols " << header.cols << '\n';
  out << "site_order " << header.site_order << '\n';
  out << "params " << params.size() << '\n';
  for (Eigen::Index i = 0; i < params.size(); ++i)
    out << format_double(params[i]) << '\n';
  if (!out) throw IoError("checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "nqsdyn-checkpoint" || version != 1)
    throw ConfigError("not a version-1 checkpoint: " + path.string());

  Checkpoint ck;
  long n_params = -1;
  std::string key;
  while (n_params < 0 && in >> key) {
    if (key == "architecture") in >> ck.header.architecture;
    else if (key == "hidden" || key == "alpha") in >> ck.header.hidden;
    else if (key == "rows") in >> ck.header.rows;
    else if (key == "cols") in >> ck.header.cols;
    else if (key == "site_order") in >> ck.header.site_order;
    else if (key == "params") in >> n_params;
    else throw ConfigError("unknown checkpoint header key '" + key + "' in " + path.string());
  }
  if (!in || n_params < 0)
    throw ConfigError("truncated checkpoint header: " + path.string());
  ck.params.resize(n_params);
  for (long i = 0; i < n_params; ++i) {
    std::string tok;
    if (!(in >> tok))
      throw ConfigError("truncated checkpoint value block: " + path.string());
    ck.params[i] = std::strtod(tok.c_str(), nullptr);
  }
  return ck;
}

}  // namespace nqs
