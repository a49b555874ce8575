#include "cpagrid/case_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>

namespace cpagrid {

namespace {

struct TableRow {
  int line = 0;
  int column = 0;
  std::vector<double> values;
};

struct Table {
  int line = 0;
  std::vector<TableRow> rows;
};

[[noreturn]] void parse_error(int line, int column, const std::string& what) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what);
}

bool is_ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Single-pass scanner over the MATLAB subset found in MATPOWER case files.
class CaseScanner {
 public:
  explicit CaseScanner(std::string_view text) : text_(text) {}

  void run() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '%') {
        skip_comment();
      } else if (c == '\'' || c == '"') {
        skip_string();
      } else if (c == 'm' && text_.substr(pos_, 4) == "mpc." && (pos_ == 0 || !is_ident(text_[pos_ - 1]))) {
        assignment();
      } else {
        advance();
      }
    }
  }

  std::map<std::string, Table> tables;
  std::map<std::string, std::pair<int, std::string>> scalars;

 private:
  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_comment() {
    while (pos_ < text_.size() && text_[pos_] != '\n') advance();
  }

  void skip_string() {
    const char quote = text_[pos_];
    advance();
    while (pos_ < text_.size() && text_[pos_] != quote && text_[pos_] != '\n') advance();
    if (pos_ < text_.size() && text_[pos_] == quote) advance();
  }

  void skip_blanks() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r')) advance();
  }

  void assignment() {
    for (int i = 0; i < 4; ++i) advance();
    std::string name;
    while (pos_ < text_.size() && is_ident(text_[pos_])) {
      name += text_[pos_];
      advance();
    }
    skip_blanks();
    if (pos_ >= text_.size() || text_[pos_] != '=') return;  // e.g. a field read, not an assignment
    advance();
    skip_blanks();
    if (pos_ < text_.size() && text_[pos_] == '[') {
      tables[name] = matrix();
    } else if (pos_ < text_.size() && text_[pos_] == '{') {
      skip_cell();
    } else {
      const int line = line_;
      std::string value;
      while (pos_ < text_.size() && text_[pos_] != ';' && text_[pos_] != '\n' && text_[pos_] != '%') {
        value += text_[pos_];
        advance();
      }
      while (!value.empty() && std::isspace(static_cast<unsigned char>(value.back()))) value.pop_back();
      scalars[name] = {line, value};
    }
  }

  void skip_cell() {
    int depth = 0;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '%') {
        skip_comment();
        continue;
      }
      if (c == '\'' || c == '"') {
        skip_string();
        continue;
      }
      if (c == '{') ++depth;
      if (c == '}' && --depth == 0) {
        advance();
        return;
      }
      advance();
    }
  }

  Table matrix() {
    Table table;
    table.line = line_;
    const int open_line = line_, open_col = col_;
    advance();  // '['
    TableRow row;
    auto finish_row = [&] {
      if (!row.values.empty()) table.rows.push_back(std::move(row));
      row = TableRow{};
    };
    while (true) {
      if (pos_ >= text_.size()) parse_error(open_line, open_col, "unterminated matrix");
      const char c = text_[pos_];
      if (c == ']') {
        advance();
        finish_row();
        return table;
      }
      if (c == '%') {
        skip_comment();
      } else if (c == ';' || c == '\n') {
        finish_row();
        advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == ',') {
        advance();
      } else if (c == '.' && text_.substr(pos_, 3) == "...") {
        skip_comment();  // line continuation
        advance();
      } else {
        const int line = line_, col = col_;
        std::string token;
        while (pos_ < text_.size()) {
          const char t = text_[pos_];
          if (t == ' ' || t == '\t' || t == '\r' || t == '\n' || t == ',' || t == ';' || t == ']' || t == '%') break;
          token += t;
          advance();
        }
        const auto value = to_number(token);
        if (!value) parse_error(line, col, "expected a number, found '" + token + "'");
        if (row.values.empty()) {
          row.line = line;
          row.column = col;
        }
        row.values.push_back(*value);
      }
    }
  }

  static std::optional<double> to_number(const std::string& token) {
    if (token == "Inf" || token == "inf" || token == "+Inf") return HUGE_VAL;
    if (token == "-Inf" || token == "-inf") return -HUGE_VAL;
    if (token.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size()) return std::nullopt;
    return v;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

const Table& require_table(const CaseScanner& scan, const std::string& name, std::size_t min_columns) {
  const auto it = scan.tables.find(name);
  if (it == scan.tables.end()) throw Error(ErrorCode::MissingTable, "mpc." + name);
  const auto& table = it->second;
  if (table.rows.empty()) return table;
  const auto width = table.rows.front().values.size();
  if (width < min_columns)
    parse_error(table.rows.front().line, table.rows.front().column,
                "mpc." + name + " needs at least " + std::to_string(min_columns) + " columns, found " +
                    std::to_string(width));
  for (const auto& row : table.rows)
    if (row.values.size() != width)
      parse_error(row.line, row.column,
                  "mpc." + name + " row has " + std::to_string(row.values.size()) + " columns, expected " +
                      std::to_string(width));
  return table;
}

long to_integer(const TableRow& row, std::size_t col, const char* what) {
  const double v = row.values[col];
  if (!std::isfinite(v) || v != std::floor(v)) parse_error(row.line, row.column, std::string(what) + " must be an integer");
  return static_cast<long>(v);
}

}  // namespace

RawCase parse_matpower(std::string_view text) {
  CaseScanner scan(text);
  scan.run();

  RawCase raw;
  const auto base = scan.scalars.find("baseMVA");
  if (base == scan.scalars.end()) throw Error(ErrorCode::MissingTable, "mpc.baseMVA");
  {
    char* end = nullptr;
    const std::string& s = base->second.second;
    raw.base_mva = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) parse_error(base->second.first, 1, "mpc.baseMVA is not a number");
    if (!(raw.base_mva > 0.0)) parse_error(base->second.first, 1, "mpc.baseMVA must be positive");
  }

  const auto& bus = require_table(scan, "bus", 13);
  const auto& gen = require_table(scan, "gen", 10);
  const auto& branch = require_table(scan, "branch", 11);

  std::unordered_map<long, std::size_t> index;
  for (const auto& row : bus.rows) {
    BusRow b;
    b.id = to_integer(row, 0, "bus id");
    b.type = static_cast<int>(to_integer(row, 1, "bus type"));
    b.pd = row.values[2];
    if (!index.emplace(b.id, raw.buses.size()).second)
      parse_error(row.line, row.column, "duplicate bus id " + std::to_string(b.id));
    raw.buses.push_back(b);
  }
  for (const auto& row : gen.rows) {
    GenRow g;
    g.bus = to_integer(row, 0, "generator bus");
    g.pg = row.values[1];
    g.status = row.values[7] > 0.0 ? 1 : 0;
    if (!index.count(g.bus)) parse_error(row.line, row.column, "generator at unknown bus " + std::to_string(g.bus));
    raw.gens.push_back(g);
  }
  for (const auto& row : branch.rows) {
    if (!(row.values[10] > 0.0)) continue;
    BranchRow br;
    br.from = to_integer(row, 0, "branch endpoint");
    br.to = to_integer(row, 1, "branch endpoint");
    br.x = row.values[3];
    if (!index.count(br.from) || !index.count(br.to))
      parse_error(row.line, row.column, "branch endpoint is not in the bus table");
    raw.branches.push_back(br);
  }
  return raw;
}

RawCase load_matpower(const std::filesystem::path& path) { return parse_matpower(read_text_file(path)); }

Grid to_grid(const RawCase& raw, const GridOptions& options) {
  if (raw.buses.empty()) throw Error(ErrorCode::DisconnectedCase, "case has no buses");
  std::unordered_map<long, NodeId> index;
  std::vector<long> labels;
  for (const auto& b : raw.buses) {
    index.emplace(b.id, static_cast<NodeId>(labels.size()));
    labels.push_back(b.id);
  }
  const auto n = raw.buses.size();

  std::vector<double> mw(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) mw[v] = -raw.buses[v].pd;
  for (const auto& g : raw.gens)
    if (g.status > 0) mw[static_cast<std::size_t>(index.at(g.bus))] += g.pg;
  std::vector<double> p(n);
  for (std::size_t v = 0; v < n; ++v) p[v] = mw[v] / raw.base_mva;

  NodeId reference = 0;
  for (std::size_t v = 0; v < n; ++v)
    if (raw.buses[v].type == 3) {
      reference = static_cast<NodeId>(v);
      break;
    }

  // Susceptances per unordered pair, summed in sorted order so the result
  // does not depend on the row order.
  std::map<std::pair<NodeId, NodeId>, std::vector<double>> parallel;
  for (const auto& br : raw.branches) {
    if (!(br.x > 0.0) || !std::isfinite(br.x))
      throw Error(ErrorCode::NonpositiveReactance,
                  "branch " + std::to_string(br.from) + "-" + std::to_string(br.to) + " has x = " + format_double(br.x));
    NodeId a = index.at(br.from), b = index.at(br.to);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    parallel[{a, b}].push_back(1.0 / br.x);
  }
  std::vector<Link> links;
  links.reserve(parallel.size());
  for (auto& [pair, susceptances] : parallel) {
    std::sort(susceptances.begin(), susceptances.end());
    double total = 0.0;
    for (double s : susceptances) total += s;
    links.push_back({pair.first, pair.second, 1.0 / total});
  }

  {
    std::vector<int> comp(n, -1);
    std::vector<std::vector<NodeId>> adj(n);
    for (const auto& l : links) {
      adj[static_cast<std::size_t>(l.from)].push_back(l.to);
      adj[static_cast<std::size_t>(l.to)].push_back(l.from);
    }
    std::vector<NodeId> stack{0};
    comp[0] = 0;
    std::size_t reached = 1;
    while (!stack.empty()) {
      const NodeId v = stack.back();
      stack.pop_back();
      for (NodeId u : adj[static_cast<std::size_t>(v)])
        if (comp[static_cast<std::size_t>(u)] < 0) {
          comp[static_cast<std::size_t>(u)] = 0;
          ++reached;
          stack.push_back(u);
        }
    }
    if (reached != n)
      throw Error(ErrorCode::DisconnectedCase,
                  std::to_string(n - reached) + " of " + std::to_string(n) + " buses are unreachable");
  }

  double residual = 0.0;
  for (double x : p) residual += x;
  if (options.strict_balance && std::abs(residual) >= 1e-6)
    throw Error(ErrorCode::InvalidGrid, "injection residual " + format_double(residual) + " p.u. exceeds 1e-6");
  p[static_cast<std::size_t>(reference)] -= residual;

  return Grid(std::move(p), std::move(links), reference, std::move(labels));
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_scenario(std::ostream& out, const AttackScenario& s) {
  const Grid& g = *s.grid;
  out << "cpagrid-scenario " << kScenarioVersion << '\n';
  out << "seed " << s.seed << '\n';
  out << "eta " << format_double(s.eta) << '\n';
  out << "degenerate_flow " << (s.degenerate_flow ? 1 : 0) << '\n';
  out << "nodes " << g.num_nodes() << " reference " << g.reference() << '\n';
  out << "# node id label p theta_pre theta_post delta\n";
  for (std::size_t v = 0; v < g.num_nodes(); ++v) {
    const auto i = static_cast<Eigen::Index>(v);
    out << "node " << v << ' ' << g.label(static_cast<NodeId>(v)) << ' ' << format_double(g.injection(static_cast<NodeId>(v)))
        << ' ' << format_double(s.pre.theta[i]) << ' ' << format_double(s.post.theta[i]) << ' '
        << format_double(s.delta[i]) << '\n';
  }
  out << "links " << g.num_links() << '\n';
  out << "# link id from to reactance\n";
  for (std::size_t e = 0; e < g.num_links(); ++e) {
    const auto& l = g.link(static_cast<LinkId>(e));
    out << "link " << e << ' ' << l.from << ' ' << l.to << ' ' << format_double(l.reactance) << '\n';
  }
  out << "attacked_nodes " << s.attacked_nodes.size();
  for (NodeId v : s.attacked_nodes) out << ' ' << v;
  out << '\n';
  out << "failed_links " << s.failed_links.size();
  for (LinkId e : s.failed_links) out << ' ' << e;
  out << '\n';
}

std::string serialize_scenario(const AttackScenario& scenario) {
  std::ostringstream out;
  write_scenario(out, scenario);
  return out.str();
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  // Next non-blank, non-comment line split into fields; empty at the end.
  std::vector<std::string> next() {
    while (pos_ < text_.size()) {
      auto end = text_.find('\n', pos_);
      if (end == std::string_view::npos) end = text_.size();
      const std::string line(text_.substr(pos_, end - pos_));
      pos_ = end + 1;
      ++line_;
      std::istringstream ss(line);
      std::vector<std::string> fields;
      for (std::string f; ss >> f;) fields.push_back(f);
      if (fields.empty() || fields.front().front() == '#') continue;
      return fields;
    }
    return {};
  }

  std::vector<std::string> expect(const std::string& key, std::size_t min_fields) {
    auto fields = next();
    if (fields.empty()) fail("unexpected end of file, expected '" + key + "'");
    if (fields.front() != key) fail("expected '" + key + "', found '" + fields.front() + "'");
    if (fields.size() < min_fields) fail("'" + key + "' line has too few fields");
    return fields;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::SchemaError, "line " + std::to_string(line_) + ": " + what);
  }

  double number(const std::string& s) const {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) fail("'" + s + "' is not a number");
    return v;
  }

  long long integer(const std::string& s) const {
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size()) fail("'" + s + "' is not an integer");
    return v;
  }

  std::vector<int> id_list(const std::vector<std::string>& fields) const {
    const auto count = integer(fields[1]);
    if (count < 0 || static_cast<std::size_t>(count) != fields.size() - 2) fail("list length does not match its count");
    std::vector<int> ids;
    for (std::size_t i = 2; i < fields.size(); ++i) ids.push_back(static_cast<int>(integer(fields[i])));
    for (std::size_t i = 1; i < ids.size(); ++i)
      if (ids[i - 1] >= ids[i]) fail("ids must be strictly increasing");
    return ids;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 0;
};

}  // namespace

AttackScenario parse_scenario(std::string_view text) {
  LineReader in(text);
  auto header = in.next();
  if (header.size() != 2 || header[0] != "cpagrid-scenario") in.fail("missing 'cpagrid-scenario' header");
  if (in.integer(header[1]) != kScenarioVersion)
    throw Error(ErrorCode::VersionMismatch,
                "scenario version " + header[1] + ", expected " + std::to_string(kScenarioVersion));

  AttackScenario s;
  {
    const auto f = in.expect("seed", 2);
    char* end = nullptr;
    s.seed = std::strtoull(f[1].c_str(), &end, 10);
    if (end != f[1].c_str() + f[1].size()) in.fail("bad seed");
  }
  s.eta = in.number(in.expect("eta", 2)[1]);
  s.degenerate_flow = in.integer(in.expect("degenerate_flow", 2)[1]) != 0;

  const auto nodes = in.expect("nodes", 4);
  const auto n = in.integer(nodes[1]);
  if (n <= 0 || nodes[2] != "reference") in.fail("bad 'nodes' line");
  const auto reference = static_cast<NodeId>(in.integer(nodes[3]));

  std::vector<double> p;
  std::vector<long> labels;
  Vector theta_pre(n), theta_post(n), delta(n);
  for (long long v = 0; v < n; ++v) {
    const auto f = in.expect("node", 7);
    if (in.integer(f[1]) != v) in.fail("node lines must be in id order");
    labels.push_back(static_cast<long>(in.integer(f[2])));
    p.push_back(in.number(f[3]));
    theta_pre[v] = in.number(f[4]);
    theta_post[v] = in.number(f[5]);
    delta[v] = in.number(f[6]);
  }
  const auto m = in.integer(in.expect("links", 2)[1]);
  if (m < 0) in.fail("negative link count");
  std::vector<Link> links;
  for (long long e = 0; e < m; ++e) {
    const auto f = in.expect("link", 5);
    if (in.integer(f[1]) != e) in.fail("link lines must be in id order");
    const Link l{static_cast<NodeId>(in.integer(f[2])), static_cast<NodeId>(in.integer(f[3])), in.number(f[4])};
    if (l.from >= l.to) in.fail("link endpoints must be stored low id first");
    links.push_back(l);
  }
  s.attacked_nodes = in.id_list(in.expect("attacked_nodes", 2));
  s.failed_links = in.id_list(in.expect("failed_links", 2));
  if (!in.next().empty()) in.fail("trailing content");

  try {
    s.grid = std::make_shared<const Grid>(std::move(p), std::move(links), reference, std::move(labels));
  } catch (const Error& e) {
    in.fail(std::string("invalid grid: ") + e.what());
  }
  const Grid& g = *s.grid;
  if (s.attacked_nodes.empty()) in.fail("attacked area is empty");
  for (NodeId v : s.attacked_nodes)
    if (v < 0 || v >= static_cast<NodeId>(g.num_nodes())) in.fail("attacked node out of range");
  s.attacked_links = induced_links(g, s.attacked_nodes);
  for (LinkId e : s.failed_links)
    if (!std::binary_search(s.attacked_links.begin(), s.attacked_links.end(), e))
      throw Error(ErrorCode::SchemaError, "failed link " + std::to_string(e) + " is not inside the attacked area");

  s.pre.theta = std::move(theta_pre);
  s.pre.flows = link_flows(g, s.pre.theta);
  s.pre.islands = islands(g);
  const auto removed = link_mask(g, s.failed_links);
  s.post.theta = std::move(theta_post);
  s.post.flows = link_flows(g, s.post.theta, removed);
  s.post.islands = islands(g, s.failed_links);
  s.delta = std::move(delta);
  return s;
}

void save_scenario(const std::filesystem::path& path, const AttackScenario& scenario) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  write_scenario(out, scenario);
  if (!out) throw Error(ErrorCode::InvalidArgument, "write failed for " + path.string());
}

AttackScenario load_scenario(const std::filesystem::path& path) { return parse_scenario(read_text_file(path)); }

}  // namespace cpagrid
