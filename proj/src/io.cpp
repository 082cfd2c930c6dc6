#include "spdshrink/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "spdshrink/errors.hpp"

namespace spdshrink {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

std::string fmt_g17(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

void write_tensor_field(const std::string& path, const TensorField& field) {
  require(field.p() > 0 && field.n > 0 && field.N > 0, Err::EmptyInput,
          "write_tensor_field: empty field");
  std::ofstream out(path);
  require(out.good(), Err::IoError,
          "write_tensor_field: cannot open '" + path + "' for writing");
  out << "SPDF1 " << field.p() << ' ' << field.N << ' ' << field.n << '\n';
  for (int site = 0; site < field.p(); ++site) {
    require(static_cast<int>(field.sites[site].size()) == field.n,
            Err::DimMismatch,
            "write_tensor_field: sites disagree on observation count");
    for (int obs = 0; obs < field.n; ++obs) {
      const Matrix& m = field.sites[site][obs];
      require(m.rows() == field.N && m.cols() == field.N, Err::DimMismatch,
              "write_tensor_field: matrix dimension disagrees with header");
      out << site << ' ' << obs;
      for (int r = 0; r < field.N; ++r) {
        for (int c = 0; c < field.N; ++c) out << ' ' << fmt_g17(m(r, c));
      }
      out << '\n';
    }
  }
  require(out.good(), Err::IoError,
          "write_tensor_field: write failed for '" + path + "'");
}

TensorField read_tensor_field(const std::string& path, bool reject_non_spd) {
  std::ifstream in(path);
  require(in.good(), Err::IoError,
          "read_tensor_field: cannot open '" + path + "'");
  std::string magic;
  in >> magic;
  require(in.good() && magic == "SPDF1", Err::BadMagic,
          "read_tensor_field: '" + path + "' does not start with SPDF1");
  long long p = 0, dim = 0, n = 0;
  in >> p >> dim >> n;
  require(in.good() && p > 0 && dim > 0 && n > 0, Err::CorruptRecord,
          "read_tensor_field: invalid header counts");

  TensorField field;
  field.N = static_cast<int>(dim);
  field.n = static_cast<int>(n);
  field.sites.assign(p, std::vector<Matrix>(n));
  std::vector<std::vector<bool>> seen(p, std::vector<bool>(n, false));

  const long long records = p * n;
  for (long long rec = 0; rec < records; ++rec) {
    long long site = 0, obs = 0;
    if (!(in >> site >> obs)) {
      // Name the first missing record for diagnostics.
      for (long long s = 0; s < p; ++s) {
        for (long long o = 0; o < n; ++o) {
          require(seen[s][o], Err::CorruptRecord,
                  "read_tensor_field: missing record for site " +
                      std::to_string(s) + " obs " + std::to_string(o));
        }
      }
      fail(Err::CorruptRecord, "read_tensor_field: truncated body");
    }
    require(site >= 0 && site < p && obs >= 0 && obs < n, Err::CorruptRecord,
            "read_tensor_field: record " + std::to_string(rec) +
                " has out-of-range ids (site " + std::to_string(site) +
                ", obs " + std::to_string(obs) + ")");
    require(!seen[site][obs], Err::CorruptRecord,
            "read_tensor_field: duplicate record for site " +
                std::to_string(site) + " obs " + std::to_string(obs));
    Matrix m(field.N, field.N);
    for (int r = 0; r < field.N; ++r) {
      for (int c = 0; c < field.N; ++c) {
        double value = 0.0;
        require(static_cast<bool>(in >> value), Err::CorruptRecord,
                "read_tensor_field: record for site " + std::to_string(site) +
                    " obs " + std::to_string(obs) + " is malformed");
        m(r, c) = value;
      }
    }
    if (reject_non_spd) {
      try {
        require_spd(m, "read_tensor_field");
      } catch (const Error&) {
        fail(Err::NotSpd, "read_tensor_field: block at site " +
                              std::to_string(site) + " obs " +
                              std::to_string(obs) +
                              " is not symmetric positive definite");
      }
    }
    field.sites[site][obs] = std::move(m);
    seen[site][obs] = true;
  }
  return field;
}

ConfigMap parse_config_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Err::IoError,
          "parse_config_file: cannot open '" + path + "'");
  ConfigMap config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, Err::ConfigError,
            "parse_config_file: line " + std::to_string(line_no) +
                " is not of the form key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), Err::ConfigError,
            "parse_config_file: empty key on line " + std::to_string(line_no));
    require(config.find(key) == config.end(), Err::ConfigError,
            "parse_config_file: duplicate key '" + key + "'");
    config[key] = value;
  }
  return config;
}

void reject_unknown_keys(const ConfigMap& config,
                         const std::vector<std::string>& allowed) {
  for (const auto& [key, value] : config) {
    bool known = false;
    for (const auto& a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    require(known, Err::ConfigError,
            "config: unknown key '" + key + "'");
  }
}

namespace {

template <typename T, typename Parser>
T parse_value(const ConfigMap& config, const std::string& key,
              const T& fallback, Parser parse) {
  const auto it = config.find(key);
  if (it == config.end()) return fallback;
  try {
    std::size_t used = 0;
    const T value = parse(it->second, &used);
    require(used == it->second.size(), Err::ConfigError, "");
    return value;
  } catch (...) {
    fail(Err::ConfigError,
         "config: value for '" + key + "' is invalid: '" + it->second + "'");
  }
}

}  // namespace

int config_int(const ConfigMap& config, const std::string& key,
               int fallback) {
  return parse_value<int>(config, key, fallback,
                          [](const std::string& s, std::size_t* used) {
                            return std::stoi(s, used);
                          });
}

double config_double(const ConfigMap& config, const std::string& key,
                     double fallback) {
  return parse_value<double>(config, key, fallback,
                             [](const std::string& s, std::size_t* used) {
                               return std::stod(s, used);
                             });
}

std::uint64_t config_u64(const ConfigMap& config, const std::string& key,
                         std::uint64_t fallback) {
  return parse_value<std::uint64_t>(
      config, key, fallback, [](const std::string& s, std::size_t* used) {
        return static_cast<std::uint64_t>(std::stoull(s, used));
      });
}

std::string config_string(const ConfigMap& config, const std::string& key,
                          const std::string& fallback) {
  const auto it = config.find(key);
  return it == config.end() ? fallback : it->second;
}

std::vector<int> config_int_list(const ConfigMap& config,
                                 const std::string& key,
                                 const std::vector<int>& fallback) {
  const auto it = config.find(key);
  if (it == config.end()) return fallback;
  std::vector<int> values;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    require(!item.empty(), Err::ConfigError,
            "config: empty element in list '" + key + "'");
    try {
      std::size_t used = 0;
      values.push_back(std::stoi(item, &used));
      require(used == item.size(), Err::ConfigError, "");
    } catch (...) {
      fail(Err::ConfigError,
           "config: list '" + key + "' has invalid element '" + item + "'");
    }
  }
  require(!values.empty(), Err::ConfigError,
          "config: list '" + key + "' is empty");
  return values;
}

std::vector<std::string> config_string_list(
    const ConfigMap& config, const std::string& key,
    const std::vector<std::string>& fallback) {
  const auto it = config.find(key);
  if (it == config.end()) return fallback;
  std::vector<std::string> values;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    require(!item.empty(), Err::ConfigError,
            "config: empty element in list '" + key + "'");
    values.push_back(item);
  }
  require(!values.empty(), Err::ConfigError,
          "config: list '" + key + "' is empty");
  return values;
}

}  // namespace spdshrink
