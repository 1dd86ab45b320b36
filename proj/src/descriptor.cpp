#include "hiermon/descriptor.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace hiermon {

namespace {

struct Token {
  std::string text;
  bool quoted = false;
};

[[noreturn]] void fail_at(std::size_t line, const std::string& what) {
  throw DescriptorError("line " + std::to_string(line) + ": " + what);
}

std::vector<Token> tokenize(std::string_view line, std::size_t line_no) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    if (c == '#') break;
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    Token tok;
    if (c == '"') {
      tok.quoted = true;
      ++i;
      bool closed = false;
      while (i < line.size()) {
        char d = line[i++];
        if (d == '\\' && i < line.size()) {
          tok.text += line[i++];
        } else if (d == '"') {
          closed = true;
          break;
        } else {
          tok.text += d;
        }
      }
      if (!closed) fail_at(line_no, "unterminated string");
    } else {
      while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r' &&
             line[i] != '#')
        tok.text += line[i++];
    }
    out.push_back(std::move(tok));
  }
  return out;
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
      return false;
  return true;
}

std::int64_t parse_ms(const std::string& s, std::size_t line_no) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || v < 0)
    fail_at(line_no, "bad timeout '" + s + "'");
  return v;
}

}  // namespace

const VirtualNode* DeploymentDescriptor::find_virtual_node(std::string_view n) const {
  for (const auto& v : virtual_nodes)
    if (v.name == n) return &v;
  return nullptr;
}

const ProcessDefinition* DeploymentDescriptor::find_process(std::string_view id) const {
  for (const auto& p : processes)
    if (p.id == id) return &p;
  return nullptr;
}

const DescriptorVariable* DeploymentDescriptor::find_variable(std::string_view n) const {
  for (const auto& v : variables)
    if (v.name == n) return &v;
  return nullptr;
}

std::vector<std::string> placeholders(std::string_view expr) {
  std::vector<std::string> names;
  std::size_t pos = 0;
  while ((pos = expr.find("${", pos)) != std::string_view::npos) {
    auto end = expr.find('}', pos + 2);
    if (end == std::string_view::npos)
      throw DescriptorError("unterminated placeholder in '" + std::string(expr) + "'");
    std::string name(expr.substr(pos + 2, end - pos - 2));
    if (!valid_name(name)) throw DescriptorError("bad placeholder '${" + name + "}'");
    names.push_back(std::move(name));
    pos = end + 1;
  }
  return names;
}

DeploymentDescriptor parse_descriptor(std::string_view text) {
  DeploymentDescriptor d;
  std::map<std::string, std::size_t> mapping_lines;
  std::map<std::string, std::size_t> process_lines;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;

  while (std::getline(in, raw)) {
    ++line_no;
    auto toks = tokenize(raw, line_no);
    if (toks.empty()) continue;
    const std::string& kw = toks[0].text;
    auto name_at = [&](std::size_t i, std::string_view what) -> const std::string& {
      if (i >= toks.size() || toks[i].quoted || !valid_name(toks[i].text))
        fail_at(line_no, "expected " + std::string(what));
      return toks[i].text;
    };

    if (kw == "descriptor") {
      if (toks.size() != 2) fail_at(line_no, "expected 'descriptor <name>'");
      d.name = name_at(1, "descriptor name");
    } else if (kw == "variable") {
      DescriptorVariable v;
      v.name = name_at(1, "variable name");
      if (toks.size() == 4 && toks[2].text == "=" && !toks[2].quoted) {
        v.default_value = toks[3].text;
      } else if (toks.size() != 2) {
        fail_at(line_no, "expected 'variable <NAME> [= \"<default>\"]'");
      }
      if (d.find_variable(v.name)) fail_at(line_no, "duplicate variable '" + v.name + "'");
      d.variables.push_back(std::move(v));
    } else if (kw == "virtual-node") {
      VirtualNode v;
      v.name = name_at(1, "virtual node name");
      if (toks.size() < 3) fail_at(line_no, "expected single|multiple");
      if (toks[2].text == "single") {
        v.multiplicity = Multiplicity::Single;
      } else if (toks[2].text == "multiple") {
        v.multiplicity = Multiplicity::Multiple;
      } else {
        fail_at(line_no, "expected single|multiple, got '" + toks[2].text + "'");
      }
      if (toks.size() == 5 && toks[3].text == "timeout") {
        v.timeout = Duration{parse_ms(toks[4].text, line_no)};
      } else if (toks.size() != 3) {
        fail_at(line_no, "expected 'virtual-node <name> single|multiple [timeout <ms>]'");
      }
      if (d.find_virtual_node(v.name))
        fail_at(line_no, "duplicate virtual node '" + v.name + "'");
      d.virtual_nodes.push_back(std::move(v));
    } else if (kw == "map") {
      if (toks.size() != 4 || toks[2].text != "->")
        fail_at(line_no, "expected 'map <virtual-node> -> <process-id>'");
      VirtualNodeMapping m{name_at(1, "virtual node name"), name_at(3, "process id")};
      if (mapping_lines.contains(m.virtual_node))
        fail_at(line_no, "virtual node '" + m.virtual_node + "' mapped twice");
      mapping_lines[m.virtual_node] = line_no;
      d.mappings.push_back(std::move(m));
    } else if (kw == "process") {
      if (toks.size() != 6 || toks[2].text != "launcher" || toks[4].text != "hostlist" ||
          !toks[5].quoted)
        fail_at(line_no, "expected 'process <id> launcher <kind> hostlist \"<expr>\"'");
      ProcessDefinition p{name_at(1, "process id"), name_at(3, "launcher kind"), toks[5].text};
      if (d.find_process(p.id)) fail_at(line_no, "duplicate process definition '" + p.id + "'");
      process_lines[p.id] = line_no;
      d.processes.push_back(std::move(p));
    } else {
      fail_at(line_no, "unknown directive '" + kw + "'");
    }
  }

  for (const auto& m : d.mappings) {
    std::size_t at = mapping_lines[m.virtual_node];
    if (!d.find_virtual_node(m.virtual_node))
      fail_at(at, "unknown virtual node '" + m.virtual_node + "'");
    if (!d.find_process(m.process))
      fail_at(at, "unknown process definition '" + m.process + "'");
  }
  for (const auto& p : d.processes) {
    std::vector<std::string> names;
    try {
      names = placeholders(p.hostlist_expr);
    } catch (const DescriptorError& e) {
      fail_at(process_lines[p.id], e.what());
    }
    for (const auto& n : names)
      if (!d.find_variable(n))
        fail_at(process_lines[p.id],
                "undeclared variable '" + n + "' in hostlist of process '" + p.id + "'");
  }
  return d;
}

DeploymentDescriptor load_descriptor(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DescriptorError("cannot open descriptor '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_descriptor(buf.str());
}

std::string render(const DeploymentDescriptor& d) {
  std::ostringstream out;
  if (!d.name.empty()) out << "descriptor " << d.name << '\n';
  for (const auto& v : d.variables) {
    out << "variable " << v.name;
    if (v.default_value) out << " = " << quote(*v.default_value);
    out << '\n';
  }
  for (const auto& v : d.virtual_nodes) {
    out << "virtual-node " << v.name << ' '
        << (v.multiplicity == Multiplicity::Single ? "single" : "multiple");
    if (v.timeout != Duration::zero()) out << " timeout " << v.timeout.count();
    out << '\n';
  }
  for (const auto& m : d.mappings) out << "map " << m.virtual_node << " -> " << m.process << '\n';
  for (const auto& p : d.processes)
    out << "process " << p.id << " launcher " << p.launcher_kind << " hostlist "
        << quote(p.hostlist_expr) << '\n';
  return out.str();
}

std::vector<std::string> LaunchPlan::hosts() const {
  std::vector<std::string> all;
  for (const auto& t : targets) all.push_back(t.host);
  return all;
}

std::vector<std::string> LaunchPlan::hosts(std::string_view virtual_node) const {
  std::vector<std::string> out;
  for (const auto& t : targets)
    if (t.virtual_node == virtual_node) out.push_back(t.host);
  return out;
}

std::pair<std::string, std::string> parse_binding(std::string_view text) {
  auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw DescriptorError("binding must look like NAME=value, got '" + std::string(text) + "'");
  std::string name(text.substr(0, eq));
  std::string value(text.substr(eq + 1));
  if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
    value = value.substr(1, value.size() - 2);
  return {std::move(name), std::move(value)};
}

LaunchPlan resolve(const DeploymentDescriptor& desc, const Bindings& bindings,
                   std::string command) {
  LaunchPlan plan;
  plan.command = std::move(command);
  for (const auto& m : desc.mappings) {
    const auto* vn = desc.find_virtual_node(m.virtual_node);
    const auto* proc = desc.find_process(m.process);
    if (vn == nullptr || proc == nullptr)
      throw DescriptorError("dangling mapping for '" + m.virtual_node + "'");

    std::string expanded;
    std::string_view expr = proc->hostlist_expr;
    std::size_t pos = 0;
    while (pos < expr.size()) {
      auto start = expr.find("${", pos);
      if (start == std::string_view::npos) {
        expanded += expr.substr(pos);
        break;
      }
      expanded += expr.substr(pos, start - pos);
      auto end = expr.find('}', start);
      std::string name(expr.substr(start + 2, end - start - 2));
      if (auto it = bindings.find(name); it != bindings.end()) {
        expanded += it->second;
      } else if (const auto* var = desc.find_variable(name); var && var->default_value) {
        expanded += *var->default_value;
      } else {
        throw DescriptorError("unbound variable " + name);
      }
      pos = end + 1;
    }

    std::vector<std::string> hosts;
    std::istringstream tokens(expanded);
    for (std::string h; tokens >> h;) hosts.push_back(h);
    if (hosts.empty())
      throw DescriptorError("empty expansion for virtual node '" + vn->name + "'");
    if (vn->multiplicity == Multiplicity::Single && hosts.size() != 1)
      throw DescriptorError("virtual node '" + vn->name + "' is single but resolved to " +
                            std::to_string(hosts.size()) + " hosts");
    for (auto& h : hosts) plan.targets.push_back({std::move(h), vn->name, proc->launcher_kind});
  }
  return plan;
}

Json to_json(const DeploymentDescriptor& d) {
  Json j;
  j["name"] = d.name;
  Json vars = Json::array();
  for (const auto& v : d.variables) {
    Json e;
    e["name"] = v.name;
    e["default"] = v.default_value ? Json(*v.default_value) : Json(nullptr);
    vars.push_back(std::move(e));
  }
  j["variables"] = std::move(vars);
  Json vns = Json::array();
  for (const auto& v : d.virtual_nodes) {
    Json e;
    e["name"] = v.name;
    e["multiplicity"] = v.multiplicity == Multiplicity::Single ? "single" : "multiple";
    e["timeout"] = v.timeout.count();
    vns.push_back(std::move(e));
  }
  j["virtual_nodes"] = std::move(vns);
  Json maps = Json::array();
  for (const auto& m : d.mappings)
    maps.push_back(Json{{"virtual_node", m.virtual_node}, {"process", m.process}});
  j["mappings"] = std::move(maps);
  Json procs = Json::array();
  for (const auto& p : d.processes)
    procs.push_back(
        Json{{"id", p.id}, {"launcher", p.launcher_kind}, {"hostlist", p.hostlist_expr}});
  j["processes"] = std::move(procs);
  return j;
}

Json to_json(const LaunchPlan& plan) {
  Json j;
  j["command"] = plan.command;
  Json targets = Json::array();
  for (const auto& t : plan.targets)
    targets.push_back(
        Json{{"host", t.host}, {"virtual_node", t.virtual_node}, {"launcher", t.launcher_kind}});
  j["targets"] = std::move(targets);
  return j;
}

}  // namespace hiermon
