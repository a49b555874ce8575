#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cpagrid/attack.hpp"
#include "cpagrid/grid.hpp"

namespace cpagrid {

struct BusRow {
  long id = 0;
  int type = 1;
  double pd = 0.0;  // MW
};

struct GenRow {
  long bus = 0;
  double pg = 0.0;  // MW
  int status = 1;
};

struct BranchRow {
  long from = 0;
  long to = 0;
  double x = 0.0;  // p.u.
};

/// The subset of a MATPOWER case used by the DC model. Out-of-service
/// branches are dropped while parsing.
struct RawCase {
  double base_mva = 100.0;
  std::vector<BusRow> buses;
  std::vector<GenRow> gens;
  std::vector<BranchRow> branches;
};

/// Parses MATLAB-struct text (`mpc.baseMVA = 100;`, `mpc.bus = [ ... ];`
/// and so on). Throws ParseError with line and column, or MissingTable.
RawCase parse_matpower(std::string_view text);
RawCase load_matpower(const std::filesystem::path& path);

struct GridOptions {
  /// Reject cases whose Pg - Pd residual exceeds 1e-6 p.u. instead of
  /// charging it to the reference bus.
  bool strict_balance = false;
};

/// Merges parallel branches (1/r = sum 1/x), converts to per unit and
/// rebalances at the reference bus (first type-3 bus, else the first bus).
/// Node ids follow the order of the bus table; labels keep the bus numbers.
Grid to_grid(const RawCase& raw, const GridOptions& options = {});

inline constexpr int kScenarioVersion = 1;

void write_scenario(std::ostream& out, const AttackScenario& scenario);
std::string serialize_scenario(const AttackScenario& scenario);

/// Throws VersionMismatch or SchemaError.
AttackScenario parse_scenario(std::string_view text);

void save_scenario(const std::filesystem::path& path, const AttackScenario& scenario);
AttackScenario load_scenario(const std::filesystem::path& path);

/// %.17g text; reads back to the same double.
std::string format_double(double value);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace cpagrid
