#ifndef DKG_IO_HPP
#define DKG_IO_HPP

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "configurations.hpp"
#include "field.hpp"
#include "groundstate.hpp"
#include "spectrum.hpp"

namespace dkg {

using json = nlohmann::json;

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline json points_json(const Points& z) {
  json a = json::array();
  for (const Point& p : z) a.push_back(std::vector<double>(p.data(), p.data() + p.size()));
  return a;
}

inline json matrix_json(const Mat& M) {
  json a = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    std::vector<double> row(M.cols());
    for (Eigen::Index j = 0; j < M.cols(); ++j) row[j] = M(i, j);
    a.push_back(row);
  }
  return a;
}

inline void write_text(const std::filesystem::path& path, const std::string& s) {
  std::ofstream f(path, std::ios::binary);
  require(bool(f), ErrorCode::IoError, "cannot open " + path.string());
  f << s;
  require(bool(f), ErrorCode::IoError, "write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(bool(f), ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::IoError, path.string() + ": " + e.what());
  }
}

// 64-bit FNV-1a, hex. Content fingerprint for manifests, not a cryptographic hash.
inline std::string fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string file_digest(const std::filesystem::path& path) { return fnv1a64(read_text(path)); }

// CSV: one "# {json}" header line, one column line, then rows printed with 17 significant digits.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const json& header, const std::vector<std::string>& cols)
      : f_(path, std::ios::binary), path_(path), ncol_(cols.size()) {
    require(bool(f_), ErrorCode::IoError, "cannot open " + path.string());
    f_ << "# " << header.dump() << "\n";
    for (std::size_t i = 0; i < cols.size(); ++i) f_ << (i ? "," : "") << cols[i];
    f_ << "\n";
  }

  void row(const std::vector<double>& v) {
    require(v.size() == ncol_, ErrorCode::IoError, "row width mismatch in " + path_.string());
    for (std::size_t i = 0; i < v.size(); ++i) f_ << (i ? "," : "") << num(v[i]);
    f_ << "\n";
    ++rows_;
  }

  std::size_t rows() const { return rows_; }

 private:
  std::ofstream f_;
  std::filesystem::path path_;
  std::size_t ncol_, rows_ = 0;
};

struct CsvTable {
  json header;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    fail(ErrorCode::IoError, "missing column " + name);
  }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  CsvTable t;
  std::string line;
  require(bool(std::getline(in, line)) && line.rfind("# ", 0) == 0, ErrorCode::IoError,
          path.string() + ": missing json header");
  try {
    t.header = json::parse(line.substr(2));
  } catch (const json::exception& e) {
    fail(ErrorCode::IoError, path.string() + ": " + e.what());
  }
  require(bool(std::getline(in, line)), ErrorCode::IoError, path.string() + ": missing column line");
  std::string cell;
  for (std::istringstream ls(line); std::getline(ls, cell, ',');) t.columns.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> r;
    for (std::istringstream ls(line); std::getline(ls, cell, ',');) {
      char* end = nullptr;
      double x = std::strtod(cell.c_str(), &end);
      require(end && *end == '\0' && end != cell.c_str(), ErrorCode::IoError, path.string() + ": bad number " + cell);
      r.push_back(x);
    }
    require(r.size() == t.columns.size(), ErrorCode::IoError, path.string() + ": ragged row");
    t.rows.push_back(std::move(r));
  }
  return t;
}

inline json params_json(const ModelParams& mp) { return {{"d", mp.d}, {"p", mp.p}, {"alpha", mp.alpha}}; }

inline json ground_state_json(const GroundState& gs) {
  return {{"params", params_json(gs.params)}, {"kappa", gs.kappa},       {"c1", gs.c1},
          {"g0", gs.g0},                      {"q0", gs.q0},             {"energy", gs.energy},
          {"kappa_match", gs.kappa_match},    {"tail_coeff", gs.tail_coeff}, {"kappa_spread", gs.kappa_spread}};
}

inline void write_ground_state_csv(const std::filesystem::path& path, const GroundState& gs) {
  CsvWriter w(path, ground_state_json(gs), {"r", "q", "dq"});
  for (std::size_t i = 0; i < gs.r_grid.size(); ++i) w.row({gs.r_grid[i], gs.q_values[i], gs.dq_values[i]});
}

inline GroundState read_ground_state_csv(const std::filesystem::path& path) {
  CsvTable t = read_csv(path);
  GroundState gs;
  try {
    const json& h = t.header;
    gs.params = {h.at("params").at("d").get<int>(), h.at("params").at("p").get<double>(),
                 h.at("params").at("alpha").get<double>()};
    gs.kappa = h.at("kappa");
    gs.c1 = h.at("c1");
    gs.g0 = h.at("g0");
    gs.q0 = h.at("q0");
    gs.energy = h.value("energy", 0.0);
    gs.kappa_match = h.value("kappa_match", gs.kappa);
    gs.tail_coeff = h.value("tail_coeff", 0.0);
    gs.kappa_spread = h.value("kappa_spread", 0.0);
  } catch (const json::exception& e) {
    fail(ErrorCode::IoError, path.string() + ": " + e.what());
  }
  gs.params.validate();
  std::size_t ir = t.col("r"), iq = t.col("q"), id = t.col("dq");
  require(t.rows.size() >= 8, ErrorCode::IoError, path.string() + ": too few rows");
  for (const auto& r : t.rows) {
    gs.r_grid.push_back(r[ir]);
    gs.q_values.push_back(r[iq]);
    gs.dq_values.push_back(r[id]);
  }
  rebuild_interp(gs);
  return gs;
}

inline json spectrum_json(const SpectralData& sd) {
  return {{"d", sd.d},
          {"alpha", sd.alpha},
          {"nu0_sq", sd.nu0_sq},
          {"nu_plus", sd.nu_plus},
          {"nu_minus", sd.nu_minus},
          {"zeta_plus", sd.zeta_plus},
          {"zeta_minus", sd.zeta_minus},
          {"beta", sd.beta},
          {"richardson_error", sd.richardson_error},
          {"kernel_residual", sd.kernel_residual},
          {"decay_rate", sd.decay_rate}};
}

inline json configuration_json(const SignedConfiguration& c) {
  json gens = json::array();
  for (const Mat& g : c.generators) gens.push_back(matrix_json(g));
  return {{"name", c.name},
          {"dim", c.dim},
          {"vertices", points_json(c.vertices)},
          {"signs", c.signs},
          {"generators", gens},
          {"gamma", c.gamma},
          {"gamma_raw", c.gamma_raw},
          {"lambda", c.lambda_omega},
          {"lambda_stated", c.lambda_stated},
          {"theta", c.theta_ratio}};
}

inline json validation_json(const ValidationReport& v) {
  json gens = json::array();
  for (const GeneratorCheck& g : v.generators)
    gens.push_back({{"maps_vertices", g.maps_vertices},
                    {"sign_equivariant", g.sign_equivariant},
                    {"tau", g.tau},
                    {"residual", g.residual},
                    {"permutation", g.permutation}});
  return {{"generators", gens},
          {"equivariant", v.equivariant},
          {"center_of_mass", v.center_of_mass},
          {"parallelism_residual", v.parallelism_residual},
          {"scalar_spread", v.scalar_spread},
          {"center_force", v.center_force},
          {"mu", v.mu},
          {"gamma", v.gamma},
          {"gamma_raw", v.gamma_raw},
          {"lambda", v.lambda_omega},
          {"theta", v.theta_ratio},
          {"admissible", v.admissible}};
}

// Field snapshot: "DKGF", u32 version, i32 d, i32 n, f64 L, f64 h, f64 t, then u and v (n^d f64 each, x fastest).
struct Snapshot {
  int d = 0, n = 0;
  double L = 0, h = 0, t = 0;
  Field u, v;
};

inline void write_snapshot(const std::filesystem::path& path, const Grid& g, const FieldState& s) {
  std::ofstream f(path, std::ios::binary);
  require(bool(f), ErrorCode::IoError, "cannot open " + path.string());
  const std::uint32_t version = 1;
  const std::int32_t d = g.d, n = g.n;
  f.write("DKGF", 4);
  f.write(reinterpret_cast<const char*>(&version), 4);
  f.write(reinterpret_cast<const char*>(&d), 4);
  f.write(reinterpret_cast<const char*>(&n), 4);
  for (double x : {g.L, g.h(), s.t}) f.write(reinterpret_cast<const char*>(&x), 8);
  f.write(reinterpret_cast<const char*>(s.u.data()), std::streamsize(8 * s.u.size()));
  f.write(reinterpret_cast<const char*>(s.v.data()), std::streamsize(8 * s.v.size()));
  require(bool(f), ErrorCode::IoError, "write failed for " + path.string());
}

inline Snapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(bool(f), ErrorCode::IoError, "cannot open " + path.string());
  char magic[4];
  std::uint32_t version = 0;
  std::int32_t d = 0, n = 0;
  f.read(magic, 4);
  f.read(reinterpret_cast<char*>(&version), 4);
  require(f && std::memcmp(magic, "DKGF", 4) == 0 && version == 1, ErrorCode::IoError,
          path.string() + ": not a field snapshot");
  f.read(reinterpret_cast<char*>(&d), 4);
  f.read(reinterpret_cast<char*>(&n), 4);
  require(f && d >= 1 && d <= 2 && n > 0 && n <= (1 << 16), ErrorCode::IoError, path.string() + ": bad dimensions");
  Snapshot s;
  s.d = d;
  s.n = n;
  f.read(reinterpret_cast<char*>(&s.L), 8);
  f.read(reinterpret_cast<char*>(&s.h), 8);
  f.read(reinterpret_cast<char*>(&s.t), 8);
  std::size_t m = d == 1 ? std::size_t(n) : std::size_t(n) * n;
  s.u.resize(Eigen::Index(m));
  s.v.resize(Eigen::Index(m));
  f.read(reinterpret_cast<char*>(s.u.data()), std::streamsize(8 * m));
  f.read(reinterpret_cast<char*>(s.v.data()), std::streamsize(8 * m));
  require(bool(f), ErrorCode::IoError, path.string() + ": truncated snapshot");
  return s;
}

struct RunManifest {
  std::string subcommand;
  json params = json::object();
  json inputs = json::object();   // path -> digest
  json outputs = json::object();  // file name -> digest
  json results = json::object();
  json environment = json::object();
  std::string version;
  double wall_seconds = 0;
  long long steps = 0;

  json to_json() const {
    return {{"subcommand", subcommand}, {"params", params},   {"inputs", inputs},
            {"outputs", outputs},       {"results", results}, {"environment", environment},
            {"version", version},
            {"wall_seconds", wall_seconds}, {"steps", steps}};
  }
};

}  // namespace dkg

#endif
