#include "egan/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "egan/serialize.hpp"

namespace egan {

namespace {

constexpr const char* kMagic = "EGCKPT1";

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

struct LineCursor {
  const std::vector<std::string>& lines;
  size_t pos = 0;

  const std::string& next(const char* what) {
    if (pos >= lines.size())
      throw CorruptionError(std::string("checkpoint ends before ") + what);
    return lines[pos++];
  }
  bool done() const { return pos >= lines.size(); }
};

size_t parse_count(const std::string& line, const std::string& prefix) {
  auto toks = split_ws(line);
  if (toks.size() != 2 || toks[0] != prefix)
    throw FormatError("checkpoint: expected '" + prefix + " <count>', got '" +
                      line + "'");
  try {
    return static_cast<size_t>(std::stoull(toks[1]));
  } catch (const std::exception&) {
    throw FormatError("checkpoint: bad count in '" + line + "'");
  }
}

std::vector<double> parse_values(const std::vector<std::string>& toks,
                                 size_t offset, size_t n,
                                 const std::string& line_kind) {
  if (toks.size() != offset + n)
    throw FormatError("checkpoint: " + line_kind + " line holds " +
                      std::to_string(toks.size() - offset) + " values, want " +
                      std::to_string(n));
  std::vector<double> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i)
    out.push_back(hex_to_double(toks[offset + i], "checkpoint value"));
  return out;
}

void write_moment_section(std::ostringstream& out, const char* header,
                          const char* tag,
                          const std::map<std::string,
                                         std::vector<double>>& moments) {
  out << header << " " << moments.size() << "\n";
  for (const auto& [name, vals] : moments) {
    out << tag << " " << name << " " << vals.size();
    for (double v : vals) out << " " << double_to_hex(v);
    out << "\n";
  }
}

std::map<std::string, std::vector<double>> read_moment_section(
    LineCursor& cur, const char* header, const char* tag) {
  size_t n = parse_count(cur.next(header), header);
  std::map<std::string, std::vector<double>> out;
  for (size_t i = 0; i < n; ++i) {
    auto toks = split_ws(cur.next("moment block"));
    if (toks.size() < 3 || toks[0] != tag)
      throw FormatError("checkpoint: malformed moment line");
    size_t count = 0;
    try {
      count = static_cast<size_t>(std::stoull(toks[2]));
    } catch (const std::exception&) {
      throw FormatError("checkpoint: bad moment count for '" + toks[1] + "'");
    }
    out[toks[1]] = parse_values(toks, 3, count, "moment");
  }
  return out;
}

}  // namespace

const char* model_role_name(ModelRole role) {
  switch (role) {
    case ModelRole::G1: return "G1";
    case ModelRole::G2: return "G2";
    case ModelRole::D: return "D";
  }
  throw ContractError("model_role_name: unknown role");
}

void save_checkpoint(const std::string& path, ModelRole role,
                     const TrainConfig& cfg, const ParameterSet& params,
                     const Optimizer* opt) {
  std::ostringstream body;
  body << kMagic << "\n";
  body << "role " << model_role_name(role) << "\n";

  std::string cfg_text = train_config_to_text(cfg);
  size_t cfg_lines = 0;
  for (char c : cfg_text)
    if (c == '\n') ++cfg_lines;
  body << "config " << cfg_lines << "\n" << cfg_text;

  auto blocks = params.all();
  body << "params " << blocks.size() << "\n";
  for (const Parameter* p : blocks) {
    body << "p " << p->name << " " << p->rows << " " << p->cols;
    for (double v : p->value) body << " " << double_to_hex(v);
    body << "\n";
  }

  if (opt != nullptr) {
    body << "opt 1\n";
    body << "opt_t " << opt->step_count() << "\n";
    write_moment_section(body, "opt_m", "m", opt->first_moments());
    write_moment_section(body, "opt_v", "v", opt->second_moments());
  } else {
    body << "opt 0\n";
  }

  std::string text = body.str();
  char digest[32];
  std::snprintf(digest, sizeof(digest), "%016llx",
                static_cast<unsigned long long>(fnv1a64(text)));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << text << "digest " << digest << "\n";
  out.flush();
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

CheckpointData load_checkpoint(const std::string& path,
                               ModelRole expected_role) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();

  if (text.empty() || text.back() != '\n')
    throw CorruptionError("checkpoint is truncated: " + path);
  size_t last_start = text.rfind('\n', text.size() - 2);
  last_start = last_start == std::string::npos ? 0 : last_start + 1;
  std::string last = text.substr(last_start, text.size() - last_start - 1);
  auto toks = split_ws(last);
  if (toks.size() != 2 || toks[0] != "digest")
    throw CorruptionError("checkpoint digest line missing: " + path);
  std::string body = text.substr(0, last_start);
  char expect[32];
  std::snprintf(expect, sizeof(expect), "%016llx",
                static_cast<unsigned long long>(fnv1a64(body)));
  if (toks[1] != expect)
    throw CorruptionError("checkpoint digest mismatch: " + path);

  std::vector<std::string> lines;
  {
    std::istringstream bs(body);
    std::string l;
    while (std::getline(bs, l)) lines.push_back(l);
  }
  LineCursor cur{lines};

  const std::string& magic = cur.next("magic");
  if (magic != kMagic) {
    if (magic.rfind("EGCKPT", 0) == 0)
      throw VersionError("unsupported checkpoint version: " + magic);
    throw FormatError("not a checkpoint file: " + path);
  }

  CheckpointData data;
  {
    auto rt = split_ws(cur.next("role"));
    if (rt.size() != 2 || rt[0] != "role")
      throw FormatError("checkpoint: malformed role line");
    if (rt[1] == "G1")
      data.role = ModelRole::G1;
    else if (rt[1] == "G2")
      data.role = ModelRole::G2;
    else if (rt[1] == "D")
      data.role = ModelRole::D;
    else
      throw FormatError("checkpoint: unknown role '" + rt[1] + "'");
  }
  if (data.role != expected_role)
    throw ContractError(std::string("checkpoint role ") +
                        model_role_name(data.role) + " does not match " +
                        model_role_name(expected_role));

  size_t cfg_lines = parse_count(cur.next("config"), "config");
  std::string cfg_text;
  for (size_t i = 0; i < cfg_lines; ++i)
    cfg_text += cur.next("config body") + "\n";
  data.config = parse_train_config_text(cfg_text, path + " [config]");

  size_t n_params = parse_count(cur.next("params"), "params");
  for (size_t i = 0; i < n_params; ++i) {
    auto pt = split_ws(cur.next("parameter block"));
    if (pt.size() < 4 || pt[0] != "p")
      throw FormatError("checkpoint: malformed parameter line");
    ParamBlock block;
    block.name = pt[1];
    try {
      block.rows = static_cast<size_t>(std::stoull(pt[2]));
      block.cols = static_cast<size_t>(std::stoull(pt[3]));
    } catch (const std::exception&) {
      throw FormatError("checkpoint: bad shape for parameter '" + block.name +
                        "'");
    }
    block.values = parse_values(pt, 4, block.rows * block.cols, "parameter");
    data.params.push_back(std::move(block));
  }

  auto ot = split_ws(cur.next("optimizer flag"));
  if (ot.size() != 2 || ot[0] != "opt" || (ot[1] != "0" && ot[1] != "1"))
    throw FormatError("checkpoint: malformed optimizer flag");
  if (ot[1] == "1") {
    data.has_optimizer = true;
    auto tt = split_ws(cur.next("optimizer step count"));
    if (tt.size() != 2 || tt[0] != "opt_t")
      throw FormatError("checkpoint: malformed opt_t line");
    try {
      data.opt_step_count = std::stoull(tt[1]);
    } catch (const std::exception&) {
      throw FormatError("checkpoint: bad opt_t value");
    }
    data.opt_m = read_moment_section(cur, "opt_m", "m");
    data.opt_v = read_moment_section(cur, "opt_v", "v");
  }
  if (!cur.done()) throw FormatError("checkpoint: trailing content");
  return data;
}

void apply_checkpoint(const CheckpointData& data, ParameterSet& params,
                      Optimizer* opt) {
  if (data.params.size() != params.count())
    throw ContractError("checkpoint holds " +
                        std::to_string(data.params.size()) +
                        " parameters, model has " +
                        std::to_string(params.count()));
  for (const ParamBlock& block : data.params) {
    if (!params.contains(block.name))
      throw ContractError("checkpoint parameter '" + block.name +
                          "' not present in the model");
    Parameter& p = params.at(block.name);
    if (p.rows != block.rows || p.cols != block.cols)
      throw ContractError("checkpoint parameter '" + block.name +
                          "' has shape " + std::to_string(block.rows) + "x" +
                          std::to_string(block.cols) + ", model wants " +
                          std::to_string(p.rows) + "x" +
                          std::to_string(p.cols));
    p.value = block.values;
  }
  if (opt != nullptr && data.has_optimizer)
    opt->restore(data.opt_step_count, data.opt_m, data.opt_v);
}

}  // namespace egan
