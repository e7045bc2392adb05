#include "dcwm/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "dcwm/envs.hpp"
#include "dcwm/errors.hpp"

namespace dcwm {

namespace {

constexpr const char* kMagic = "dcwm-checkpoint v1";

template <typename T>
const char* precision_word();
template <>
const char* precision_word<float>() { return "float"; }
template <>
const char* precision_word<double>() { return "double"; }

struct BlockDesc {
  std::string name;
  int rows = 0, cols = 0;
  int64_t step_count = 0;
};

struct Header {
  std::string precision;
  RunConfig cfg;
  int64_t episode = 0, env_step = 0;
  std::vector<BlockDesc> blocks;
  uint64_t payload_bytes = 0;
};

[[noreturn]] void mangled(const std::string& what) {
  throw CheckpointVersionError("malformed checkpoint header: " + what);
}

std::string next_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) mangled(std::string("missing ") + what);
  return line;
}

std::string parse_magic(const std::string& line, const std::string& path) {
  std::istringstream ss(line);
  std::string word, version, precision;
  ss >> word >> version >> precision;
  if (word + " " + version != kMagic || (precision != "float" && precision != "double"))
    throw CheckpointVersionError("not a recognized checkpoint: " + path);
  return precision;
}

int64_t parse_counter(std::istream& in, const char* key) {
  std::istringstream ss(next_line(in, key));
  std::string word;
  int64_t value = 0;
  if (!(ss >> word >> value) || word != key) mangled(std::string("expected ") + key);
  return value;
}

// Everything up to and including the payload-size line; leaves the stream at
// the first payload byte.
Header read_header(std::istream& in, const std::string& path) {
  Header h;
  h.precision = parse_magic(next_line(in, "magic line"), path);

  auto trimmed = [](const std::string& s) {
    const auto a = s.find_first_not_of(' ');
    if (a == std::string::npos) return std::string();
    return s.substr(a, s.find_last_not_of(' ') - a + 1);
  };
  const int64_t config_lines = parse_counter(in, "config");
  for (int64_t i = 0; i < config_lines; ++i) {
    const std::string line = next_line(in, "config entry");
    const auto eq = line.find('=');
    if (eq == std::string::npos) mangled("config entry without '='");
    const std::string key = trimmed(line.substr(0, eq));
    const std::string value = trimmed(line.substr(eq + 1));
    if (key.empty() || value.empty()) mangled("empty config key or value");
    apply_config_key(h.cfg, key, value);
  }
  h.cfg.validate();

  h.episode = parse_counter(in, "episode");
  h.env_step = parse_counter(in, "env_step");
  const int64_t blocks = parse_counter(in, "blocks");
  for (int64_t i = 0; i < blocks; ++i) {
    std::istringstream ss(next_line(in, "block descriptor"));
    std::string word;
    BlockDesc d;
    if (!(ss >> word >> d.name >> d.rows >> d.cols >> d.step_count) || word != "block")
      mangled("bad block descriptor");
    h.blocks.push_back(std::move(d));
  }
  h.payload_bytes = static_cast<uint64_t>(parse_counter(in, "payload"));
  if (h.cfg.precision != h.precision) mangled("precision word disagrees with config");
  return h;
}

}  // namespace

template <typename T>
TrainerState<T> make_trainer_state(const RunConfig& cfg, Rng& rng) {
  const EnvSpec spec = make_env(cfg.env)->spec();
  TrainerState<T> st;
  st.cfg = cfg;
  WorldModelConfig wm_cfg = cfg.wm;
  wm_cfg.obs_dim = spec.obs_dim;
  wm_cfg.act_dim = spec.act_dim;
  st.wm = std::make_unique<WorldModel<T>>(wm_cfg, rng);
  std::vector<T> lo(spec.action_low.begin(), spec.action_low.end());
  std::vector<T> hi(spec.action_high.begin(), spec.action_high.end());
  st.agent = std::make_unique<Agent<T>>(st.wm->encoded_width(), spec.act_dim, cfg.wm.mlp_hidden,
                                        cfg.td, lo, hi, rng);
  return st;
}

template <typename T>
std::vector<ParamBlock<T>*> checkpoint_blocks(TrainerState<T>& st) {
  std::vector<ParamBlock<T>*> out = st.wm->all_params();
  auto append = [&out](std::vector<ParamBlock<T>*> more) {
    out.insert(out.end(), more.begin(), more.end());
  };
  for (int k = 0; k < st.cfg.td.num_q; ++k) append(st.agent->critic(k).params());
  for (int k = 0; k < st.cfg.td.num_q; ++k) append(st.agent->target_critic(k).params());
  append(st.agent->policy().params());
  append(st.agent->target_policy().params());
  return out;
}

template <typename T>
void save_checkpoint(const std::string& path, TrainerState<T>& st) {
  const auto blocks = checkpoint_blocks(st);

  std::ostringstream header;
  header << kMagic << ' ' << precision_word<T>() << '\n';
  const auto entries = config_entries(st.cfg);
  header << "config " << entries.size() << '\n';
  for (const auto& [k, v] : entries) header << k << " = " << v << '\n';
  header << "episode " << st.episode << '\n';
  header << "env_step " << st.env_step << '\n';
  header << "blocks " << blocks.size() << '\n';
  uint64_t payload = 0;
  for (const auto* b : blocks) {
    header << "block " << b->name << ' ' << b->value.rows << ' ' << b->value.cols << ' '
           << b->step_count << '\n';
    payload += 3u * b->value.data.size() * sizeof(T);
  }
  header << "payload " << payload << '\n';

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContractError("cannot open checkpoint for writing: " + path);
  const std::string head = header.str();
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  auto dump = [&out](const Mat<T>& m) {
    out.write(reinterpret_cast<const char*>(m.data.data()),
              static_cast<std::streamsize>(m.data.size() * sizeof(T)));
  };
  for (const auto* b : blocks) {
    dump(b->value);
    dump(b->adam_m);
    dump(b->adam_v);
  }
  out.flush();
  if (!out) throw ContractError("short write while saving checkpoint: " + path);
}

template <typename T>
TrainerState<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("cannot open checkpoint: " + path);
  const Header h = read_header(in, path);
  if (h.precision != precision_word<T>())
    throw CheckpointVersionError("checkpoint holds " + h.precision + " weights; reopen as " +
                                 h.precision);

  Rng rng(h.cfg.seed);
  TrainerState<T> st = make_trainer_state<T>(h.cfg, rng);
  st.episode = h.episode;
  st.env_step = h.env_step;

  const auto blocks = checkpoint_blocks(st);
  if (blocks.size() != h.blocks.size())
    throw CheckpointShapeError("checkpoint lists " + std::to_string(h.blocks.size()) +
                               " blocks, networks expect " + std::to_string(blocks.size()));
  uint64_t expected = 0;
  for (size_t i = 0; i < blocks.size(); ++i) {
    const BlockDesc& d = h.blocks[i];
    ParamBlock<T>* b = blocks[i];
    if (d.name != b->name || d.rows != b->value.rows || d.cols != b->value.cols)
      throw CheckpointShapeError("block " + std::to_string(i) + ": stored " + d.name + " " +
                                 std::to_string(d.rows) + "x" + std::to_string(d.cols) +
                                 ", expected " + b->name + " " + std::to_string(b->value.rows) +
                                 "x" + std::to_string(b->value.cols));
    expected += 3u * b->value.data.size() * sizeof(T);
  }
  if (expected != h.payload_bytes)
    throw CheckpointShapeError("payload size " + std::to_string(h.payload_bytes) +
                               " disagrees with block shapes (" + std::to_string(expected) + ")");

  auto slurp = [&in, &path](Mat<T>& m) {
    in.read(reinterpret_cast<char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(T)));
    if (in.gcount() != static_cast<std::streamsize>(m.data.size() * sizeof(T)))
      throw CheckpointTruncatedError("checkpoint payload ends early: " + path);
  };
  for (size_t i = 0; i < blocks.size(); ++i) {
    ParamBlock<T>* b = blocks[i];
    slurp(b->value);
    slurp(b->adam_m);
    slurp(b->adam_v);
    b->step_count = h.blocks[i].step_count;
    ++b->version;
  }
  return st;
}

std::string checkpoint_precision(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("cannot open checkpoint: " + path);
  return parse_magic(next_line(in, "magic line"), path);
}

template struct TrainerState<float>;
template struct TrainerState<double>;
template TrainerState<float> make_trainer_state<float>(const RunConfig&, Rng&);
template TrainerState<double> make_trainer_state<double>(const RunConfig&, Rng&);
template std::vector<ParamBlock<float>*> checkpoint_blocks<float>(TrainerState<float>&);
template std::vector<ParamBlock<double>*> checkpoint_blocks<double>(TrainerState<double>&);
template void save_checkpoint<float>(const std::string&, TrainerState<float>&);
template void save_checkpoint<double>(const std::string&, TrainerState<double>&);
template TrainerState<float> load_checkpoint<float>(const std::string&);
template TrainerState<double> load_checkpoint<double>(const std::string&);

}  // namespace dcwm
