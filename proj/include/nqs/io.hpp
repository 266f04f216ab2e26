#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace nqs {

inline constexpr const char* k_version = "0.1.0";

// Error taxonomy shared by the library and the command line, which maps each
// type to its own exit code. ConfigError: a plan or input file says something
// invalid. CapError: the request is valid but exceeds a hard resource cap
// (e.g. asks for exact references beyond the dense-state limit). IoError:
// filesystem-level failures (unreadable input, unwritable output).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

void set_log_level(LogLevel level);
LogLevel log_level();
LogLevel parse_log_level(const std::string& name);
void log_message(LogLevel level, const std::string& msg);

inline void log_error(const std::string& msg) { log_message(LogLevel::error, msg); }
inline void log_warn(const std::string& msg) { log_message(LogLevel::warn, msg); }
inline void log_info(const std::string& msg) { log_message(LogLevel::info, msg); }
inline void log_debug(const std::string& msg) { log_message(LogLevel::debug, msg); }

// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

// RFC 4180 table writer: CRLF line endings, quoting only where required,
// fixed column count enforced per row.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path,
            const std::vector<std::string>& columns);
  void write_row(const std::vector<std::string>& cells);
  static std::string escape(const std::string& cell);

 private:
  std::ofstream out_;
  std::size_t n_cols_ = 0;
};

void append_jsonl(const std::filesystem::path& path, const nlohmann::json& record);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& value);
nlohmann::json read_json_file(const std::filesystem::path& path);

void ensure_dir(const std::filesystem::path& dir);

// Parameter snapshot on disk: a short self-describing text header followed by
// one decimal value per line, written so reloading reproduces the exact
// doubles. Version 1 layout:
//   nqsdyn-checkpoint 1
//   architecture <tag>
//   hidden <d_h>        (or "alpha <units per site>" for rbm tags)
//   rows <r>
//   cols <c>
//   site_order row-major
//   params <count>
//   <count> value lines
struct CheckpointHeader {
  std::string architecture;
  int hidden = 0;
  int rows = 0;
  int cols = 0;
  std::string site_order = "row-major";
};

void save_checkpoint(const std::filesystem::path& path,
                     const CheckpointHeader& header,
                     const Eigen::VectorXd& params);

struct Checkpoint {
  CheckpointHeader header;
  Eigen::VectorXd params;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace nqs
