#include "rbn/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace rbn {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace {

using nlohmann::json;

void put_bytes(std::string& out, const void* p, size_t n) {
  out.append(static_cast<const char*>(p), n);
}
void put_u32(std::string& out, std::uint32_t v) { put_bytes(out, &v, 4); }
void put_u64(std::string& out, std::uint64_t v) { put_bytes(out, &v, 8); }
void put_f64(std::string& out, double v) { put_bytes(out, &v, 8); }
void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

struct Reader {
  const std::string& buf;
  size_t at = 0;
  explicit Reader(const std::string& b) : buf(b) {}
  void need(size_t n) const {
    if (at + n > buf.size()) throw std::runtime_error("file truncated");
  }
  void bytes(void* p, size_t n) {
    need(n);
    std::memcpy(p, buf.data() + at, n);
    at += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, 8);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(buf.data() + at, n);
    at += n;
    return s;
  }
};

json vec_to_json(const VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

VectorXd vec_from_json(const json& a) {
  VectorXd v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v(i) = a[i].get<double>();
  return v;
}

}  // namespace

void atomic_write(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("rename failed for " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return s;
}

std::string system_to_json(const SystemModel& sys) {
  json j;
  j["name"] = sys.name;
  j["v"] = sys.speed;
  j["u_min"] = vec_to_json(sys.bounds.lower);
  j["u_max"] = vec_to_json(sys.bounds.upper);
  j["collision_radius"] = sys.collision_radius;
  j["obstacle_center"] = {sys.obstacle_center(0), sys.obstacle_center(1)};
  j["obstacle_radius"] = sys.obstacle_radius;
  j["domain_lo"] = vec_to_json(sys.domain_lo);
  j["domain_hi"] = vec_to_json(sys.domain_hi);
  return j.dump();
}

SystemModel system_from_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  SystemModel sys = make_system(j.at("name").get<std::string>());
  if (j.contains("v")) sys.speed = j["v"].get<double>();
  if (j.contains("u_min")) sys.bounds.lower = vec_from_json(j["u_min"]);
  if (j.contains("u_max")) sys.bounds.upper = vec_from_json(j["u_max"]);
  if (j.contains("collision_radius")) sys.collision_radius = j["collision_radius"].get<double>();
  if (j.contains("obstacle_center")) {
    sys.obstacle_center(0) = j["obstacle_center"][0].get<double>();
    sys.obstacle_center(1) = j["obstacle_center"][1].get<double>();
  }
  if (j.contains("obstacle_radius")) sys.obstacle_radius = j["obstacle_radius"].get<double>();
  if (j.contains("domain_lo")) sys.domain_lo = vec_from_json(j["domain_lo"]);
  if (j.contains("domain_hi")) sys.domain_hi = vec_from_json(j["domain_hi"]);
  if (sys.bounds.dim() != sys.control_dim || sys.domain_lo.size() != sys.state_dim ||
      sys.domain_hi.size() != sys.state_dim)
    throw std::runtime_error("system json: dimension mismatch for " + sys.name);
  for (int k = 0; k < sys.control_dim; ++k)
    if (!(sys.bounds.lower(k) <= sys.bounds.upper(k)) || !std::isfinite(sys.bounds.lower(k)) ||
        !std::isfinite(sys.bounds.upper(k)))
      throw std::runtime_error("system json: invalid control bounds");
  return sys;
}

void write_grid_value(const std::string& path, const GridValue& gv,
                      const std::string& config_json) {
  std::string out;
  out.reserve(64 + gv.values.size() * 8 + config_json.size());
  put_bytes(out, "RBNGRID1", 8);
  put_u32(out, static_cast<std::uint32_t>(gv.grid.dims()));
  put_f64(out, gv.tau);
  put_f64(out, gv.gamma);
  for (int d = 0; d < gv.grid.dims(); ++d) {
    put_f64(out, gv.grid.mins(d));
    put_f64(out, gv.grid.maxs(d));
    put_u32(out, static_cast<std::uint32_t>(gv.grid.counts(d)));
    out.push_back(static_cast<char>(gv.grid.periodic[d]));
  }
  put_str(out, config_json);
  put_u64(out, static_cast<std::uint64_t>(gv.values.size()));
  put_bytes(out, gv.values.data(), gv.values.size() * 8);
  atomic_write(path, out);
}

GridFile read_grid_value(const std::string& path) {
  const std::string buf = read_file(path);
  Reader r(buf);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, "RBNGRID1", 8) != 0)
    throw std::runtime_error(path + ": not a RBNGRID1 file");
  GridFile out;
  const int nd = static_cast<int>(r.u32());
  out.value.tau = r.f64();
  out.value.gamma = r.f64();
  Grid& g = out.value.grid;
  g.mins.resize(nd);
  g.maxs.resize(nd);
  g.counts.resize(nd);
  g.periodic.resize(nd);
  for (int d = 0; d < nd; ++d) {
    g.mins(d) = r.f64();
    g.maxs(d) = r.f64();
    g.counts(d) = static_cast<int>(r.u32());
    char p;
    r.bytes(&p, 1);
    g.periodic[d] = static_cast<std::uint8_t>(p);
  }
  g.validate();
  out.config_json = r.str();
  const std::uint64_t nv = r.u64();
  if (nv != static_cast<std::uint64_t>(g.num_nodes()))
    throw std::runtime_error(path + ": value count does not match grid");
  out.value.values.resize(static_cast<Eigen::Index>(nv));
  r.bytes(out.value.values.data(), nv * 8);
  return out;
}

void write_value_net(const std::string& path, const ValueNet& net,
                     const std::string& config_json) {
  std::string out;
  put_bytes(out, "RBNNET1", 7);
  put_u32(out, static_cast<std::uint32_t>(net.params.hidden_layers()));
  put_u32(out, static_cast<std::uint32_t>(net.params.hidden_size()));
  put_u32(out, static_cast<std::uint32_t>(net.params.in_dim()));
  put_f64(out, net.params.omega0);
  put_f64(out, net.t_f);
  put_f64(out, net.gamma_min);
  put_f64(out, net.gamma_max);
  put_u32(out, static_cast<std::uint32_t>(net.norm_scale.size()));
  put_bytes(out, net.norm_scale.data(), net.norm_scale.size() * 8);
  put_bytes(out, net.norm_offset.data(), net.norm_offset.size() * 8);
  put_str(out, system_to_json(net.system));
  put_str(out, config_json);
  put_u32(out, static_cast<std::uint32_t>(net.params.W.size()));
  for (size_t k = 0; k < net.params.W.size(); ++k) {
    const MatrixXd& W = net.params.W[k];
    put_u32(out, static_cast<std::uint32_t>(W.rows()));
    put_u32(out, static_cast<std::uint32_t>(W.cols()));
    put_bytes(out, W.data(), W.size() * 8);
    put_bytes(out, net.params.b[k].data(), net.params.b[k].size() * 8);
  }
  atomic_write(path, out);
}

NetFile read_value_net(const std::string& path) {
  const std::string buf = read_file(path);
  Reader r(buf);
  char magic[7];
  r.bytes(magic, 7);
  if (std::memcmp(magic, "RBNNET1", 7) != 0)
    throw std::runtime_error(path + ": not a RBNNET1 file");
  NetFile out;
  ValueNet& net = out.net;
  const int L = static_cast<int>(r.u32());
  const int h = static_cast<int>(r.u32());
  const int in = static_cast<int>(r.u32());
  net.params.omega0 = r.f64();
  net.t_f = r.f64();
  net.gamma_min = r.f64();
  net.gamma_max = r.f64();
  const int nn = static_cast<int>(r.u32());
  net.norm_scale.resize(nn);
  r.bytes(net.norm_scale.data(), nn * 8);
  net.norm_offset.resize(nn);
  r.bytes(net.norm_offset.data(), nn * 8);
  net.system = system_from_json(r.str());
  out.config_json = r.str();
  const int blocks = static_cast<int>(r.u32());
  if (blocks != L + 1) throw std::runtime_error(path + ": layer count mismatch");
  for (int k = 0; k < blocks; ++k) {
    const int rows = static_cast<int>(r.u32());
    const int cols = static_cast<int>(r.u32());
    MatrixXd W(rows, cols);
    r.bytes(W.data(), W.size() * 8);
    VectorXd b(rows);
    r.bytes(b.data(), rows * 8);
    net.params.W.push_back(std::move(W));
    net.params.b.push_back(std::move(b));
  }
  if (net.params.in_dim() != in || net.params.hidden_size() != h ||
      net.system.state_dim + 2 != in)
    throw std::runtime_error(path + ": architecture fields inconsistent");
  return out;
}

}  // namespace rbn
