#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "aigflow/aig.hpp"
#include "aigflow/error.hpp"

namespace aigflow {
namespace {

using Literal = std::uint64_t;

[[noreturn]] void fail(ErrorCode code, std::size_t line, const std::string& msg) {
  throw Error(code, "aiger:" + std::to_string(line) + ": " + msg);
}

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  // Next non-empty line, or false at end of input.
  bool next(std::string_view& line) {
    while (pos_ < text_.size()) {
      auto end = text_.find('\n', pos_);
      if (end == std::string_view::npos) end = text_.size();
      line = text_.substr(pos_, end - pos_);
      pos_ = end + 1;
      ++number_;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.find_first_not_of(" \t") != std::string_view::npos) return true;
    }
    return false;
  }

  std::size_t number() const { return number_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t number_ = 0;
};

std::vector<Literal> parse_numbers(std::string_view line, std::size_t lineno) {
  std::vector<Literal> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) break;
    Literal value = 0;
    auto [ptr, ec] = std::from_chars(line.data() + i, line.data() + line.size(), value);
    if (ec != std::errc() || (ptr != line.data() + line.size() && *ptr != ' ' && *ptr != '\t'))
      fail(ErrorCode::kParse, lineno, "expected unsigned integers, got '" + std::string(line) + "'");
    out.push_back(value);
    i = static_cast<std::size_t>(ptr - line.data());
  }
  return out;
}

struct AndDef {
  Literal lhs, rhs0, rhs1;
  std::size_t line;
};

}  // namespace

Aig parse_aiger(std::string_view text) {
  LineReader reader(text);
  std::string_view line;
  if (!reader.next(line)) fail(ErrorCode::kParse, 0, "empty document");

  if (line.substr(0, 4) != "aag ") fail(ErrorCode::kParse, reader.number(), "malformed header: expected 'aag M I L O A'");
  const auto header = parse_numbers(line.substr(4), reader.number());
  if (header.size() < 5) fail(ErrorCode::kParse, reader.number(), "malformed header: expected 5 counts");
  const Literal max_var = header[0], num_inputs = header[1], num_latches = header[2], num_outputs = header[3],
                num_ands = header[4];
  if (num_latches > 0) fail(ErrorCode::kUnsupported, reader.number(), "sequential AIGs (latches) are not supported");
  for (std::size_t i = 5; i < header.size(); ++i)
    if (header[i] != 0) fail(ErrorCode::kUnsupported, reader.number(), "AIGER 1.9 B/C/J/F sections are not supported");
  if (max_var < num_inputs + num_ands) fail(ErrorCode::kParse, reader.number(), "malformed header: M < I + A");

  auto check_lit = [&](Literal lit, std::size_t ln) {
    if (lit / 2 > max_var)
      fail(ErrorCode::kOutOfRange, ln, "literal " + std::to_string(lit) + " exceeds maximum variable index");
  };
  auto one_number = [&](const char* what) {
    if (!reader.next(line)) fail(ErrorCode::kParse, reader.number(), std::string("missing ") + what + " line");
    auto nums = parse_numbers(line, reader.number());
    if (nums.size() != 1) fail(ErrorCode::kParse, reader.number(), std::string("malformed ") + what + " line");
    check_lit(nums[0], reader.number());
    return nums[0];
  };

  // var -> node id (UINT32_MAX when undefined)
  std::vector<NodeId> var_node(max_var + 1, UINT32_MAX);
  std::vector<Literal> input_lits;
  for (Literal i = 0; i < num_inputs; ++i) {
    auto lit = one_number("input");
    if (lit < 2 || (lit & 1)) fail(ErrorCode::kParse, reader.number(), "input literal must be even and non-constant");
    if (var_node[lit / 2] != UINT32_MAX) fail(ErrorCode::kParse, reader.number(), "variable defined twice");
    var_node[lit / 2] = static_cast<NodeId>(i);
    input_lits.push_back(lit);
  }
  std::vector<Literal> output_lits;
  for (Literal i = 0; i < num_outputs; ++i) output_lits.push_back(one_number("output"));

  std::vector<AndDef> ands;
  ands.reserve(num_ands);
  for (Literal i = 0; i < num_ands; ++i) {
    if (!reader.next(line)) fail(ErrorCode::kParse, reader.number(), "missing AND line");
    auto nums = parse_numbers(line, reader.number());
    if (nums.size() != 3) fail(ErrorCode::kParse, reader.number(), "malformed AND line");
    for (auto lit : nums) check_lit(lit, reader.number());
    if (nums[0] < 2 || (nums[0] & 1)) fail(ErrorCode::kParse, reader.number(), "AND output literal must be even");
    if (nums[1] == nums[2]) fail(ErrorCode::kParse, reader.number(), "AND with identical operands");
    ands.push_back({nums[0], nums[1], nums[2], reader.number()});
  }
  // Remaining lines are the symbol table and comments.

  bool uses_constant = false;
  for (const auto& a : ands) uses_constant |= (a.rhs0 < 2 || a.rhs1 < 2);
  for (auto lit : output_lits) uses_constant |= (lit < 2);

  std::vector<GateType> types(num_inputs, GateType::kPi);
  std::vector<NodeId> constants;
  NodeId const_node = UINT32_MAX;
  if (uses_constant) {
    const_node = static_cast<NodeId>(types.size());
    types.push_back(GateType::kPi);
    constants.push_back(const_node);
    var_node[0] = const_node;
  }
  for (const auto& a : ands) {
    if (var_node[a.lhs / 2] != UINT32_MAX) fail(ErrorCode::kParse, a.line, "variable defined twice");
    var_node[a.lhs / 2] = static_cast<NodeId>(types.size());
    types.push_back(GateType::kAnd);
  }

  std::unordered_map<Literal, NodeId> not_node;
  std::vector<Edge> not_edges;
  auto resolve = [&](Literal lit, std::size_t ln) -> NodeId {
    const NodeId base = var_node[lit / 2];
    if (base == UINT32_MAX)
      fail(ErrorCode::kOutOfRange, ln, "literal " + std::to_string(lit) + " refers to an undefined variable");
    if ((lit & 1) == 0) return base;
    auto [it, inserted] = not_node.try_emplace(lit, 0);
    if (inserted) {
      it->second = static_cast<NodeId>(types.size());
      types.push_back(GateType::kNot);
      not_edges.push_back({base, it->second});
    }
    return it->second;
  };

  std::vector<Edge> edges;
  edges.reserve(2 * ands.size());
  for (const auto& a : ands) {
    const NodeId dst = var_node[a.lhs / 2];
    const NodeId s0 = resolve(a.rhs0, a.line);
    const NodeId s1 = resolve(a.rhs1, a.line);
    edges.push_back({s0, dst});
    edges.push_back({s1, dst});
  }
  std::vector<NodeId> outputs;
  for (auto lit : output_lits) outputs.push_back(resolve(lit, 0));
  edges.insert(edges.end(), not_edges.begin(), not_edges.end());

  Aig aig(std::move(types), std::move(edges), std::move(outputs), std::move(constants));
  try {
    aig.finalize();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kCycle) throw Error(ErrorCode::kCycle, "aiger: cyclic definition: " + std::string(e.what()));
    throw;
  }
  return aig;
}

Aig read_aiger_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_aiger(ss.str());
}

std::string write_aiger(const Aig& aig) {
  if (!aig.finalized()) throw Error(ErrorCode::kInvalidArgument, "write_aiger requires a finalized Aig");
  const std::size_t n = aig.size();
  std::vector<Literal> lit(n, 0);
  Literal next_var = 1;
  std::vector<NodeId> ands;
  for (NodeId v = 0; v < n; ++v)
    if (aig.type(v) == GateType::kPi && !aig.is_constant(v)) lit[v] = 2 * next_var++;
  const Literal num_inputs = next_var - 1;
  for (NodeId v = 0; v < n; ++v)
    if (aig.type(v) == GateType::kAnd) {
      lit[v] = 2 * next_var++;
      ands.push_back(v);
    }
  // constants keep literal 0; inverters resolve in topological order
  for (const auto& group : topo_levels(aig))
    for (NodeId v : group)
      if (aig.type(v) == GateType::kNot) {
        const NodeId src = aig.fanins(v)[0];
        if (aig.type(src) == GateType::kNot)
          throw Error(ErrorCode::kUnsupported, "write_aiger: double inversion at node " + std::to_string(v));
        lit[v] = lit[src] ^ 1;
      }

  std::ostringstream out;
  out << "aag " << (next_var - 1) << ' ' << num_inputs << " 0 " << aig.outputs().size() << ' ' << ands.size()
      << '\n';
  for (NodeId v = 0; v < n; ++v)
    if (aig.type(v) == GateType::kPi && !aig.is_constant(v)) out << lit[v] << '\n';
  for (NodeId o : aig.outputs()) out << lit[o] << '\n';
  for (NodeId v : ands) {
    auto f = aig.fanins(v);
    out << lit[v] << ' ' << lit[f[0]] << ' ' << lit[f[1]] << '\n';
  }
  return out.str();
}

}  // namespace aigflow
