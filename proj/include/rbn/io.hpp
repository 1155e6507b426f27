#pragma once

#include <string>

#include "rbn/grid.hpp"
#include "rbn/network.hpp"

namespace rbn {

// Writes a whole file atomically (temp file in the same directory + rename).
void atomic_write(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

std::string system_to_json(const SystemModel& sys);
SystemModel system_from_json(const std::string& json_text);

// Grid value file, magic "RBNGRID1": dims, per-dim min/max/count/periodic,
// tau, gamma, an embedded config string, then little-endian f64 node values
// in row-major order.
void write_grid_value(const std::string& path, const GridValue& gv,
                      const std::string& config_json = "{}");
struct GridFile {
  GridValue value;
  std::string config_json;
};
GridFile read_grid_value(const std::string& path);

// Net checkpoint, magic "RBNNET1": architecture, omega0, t_f, gamma range,
// normalization constants, system description, embedded config, then the
// parameter blocks as little-endian f64 (column-major per matrix).
void write_value_net(const std::string& path, const ValueNet& net,
                     const std::string& config_json = "{}");
struct NetFile {
  ValueNet net;
  std::string config_json;
};
NetFile read_value_net(const std::string& path);

}  // namespace rbn
