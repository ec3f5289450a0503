#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sforge/autograd/optim.hpp"
#include "sforge/autograd/tensor.hpp"

namespace sforge {

// Self-describing model container.
//
//   SFORGE1\n
//   text <name> <byte-count>\n<bytes>\n
//   tensor <name> <rank> <d0> ... <dn>\n<row-major float64, little-endian>\n
//   ...
//   end\n
//
// Names contain no whitespace. Sections appear in insertion order.
class Checkpoint {
 public:
  static constexpr const char* kMagic = "SFORGE1";

  void put_text(const std::string& name, std::string body) {
    check_name(name);
    put(texts_, name, std::move(body));
  }

  void put_tensor(const std::string& name, const Tensor& t) {
    check_name(name);
    put(tensors_, name, t.clone());
  }

  bool has_text(const std::string& name) const { return find(texts_, name) != nullptr; }
  bool has_tensor(const std::string& name) const { return find(tensors_, name) != nullptr; }

  const std::string& text(const std::string& name) const {
    if (auto* p = find(texts_, name)) return *p;
    fail(ErrorKind::Parse, "checkpoint has no text section '", name, "'");
  }

  const Tensor& tensor(const std::string& name) const {
    if (auto* p = find(tensors_, name)) return *p;
    fail(ErrorKind::Parse, "checkpoint has no tensor '", name, "'");
  }

  const std::vector<std::pair<std::string, Tensor>>& tensors() const { return tensors_; }

  void write(std::ostream& out) const {
    out << kMagic << '\n';
    for (const auto& [name, body] : texts_) {
      out << "text " << name << ' ' << body.size() << '\n';
      out.write(body.data(), static_cast<std::streamsize>(body.size()));
      out << '\n';
    }
    for (const auto& [name, t] : tensors_) {
      out << "tensor " << name << ' ' << t.rank();
      for (auto d : t.shape()) out << ' ' << d;
      out << '\n';
      for (double v : t.values()) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        char bytes[8];
        for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
        out.write(bytes, 8);
      }
      out << '\n';
    }
    out << "end\n";
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Data, "cannot open checkpoint '", path, "' for writing");
    write(out);
    if (!out) fail(ErrorKind::Data, "failed writing checkpoint '", path, "'");
  }

  static Checkpoint read(std::istream& in) {
    Checkpoint ck;
    std::string line;
    if (!std::getline(in, line) || line != kMagic) fail(ErrorKind::Parse, "missing ", kMagic, " header");
    while (std::getline(in, line)) {
      if (line == "end") return ck;
      std::istringstream head(line);
      std::string kind, name;
      head >> kind >> name;
      if (kind == "text") {
        std::size_t n = 0;
        if (!(head >> n)) fail(ErrorKind::Parse, "bad text header '", line, "'");
        std::string body(n, '\0');
        in.read(body.data(), static_cast<std::streamsize>(n));
        if (in.get() != '\n') fail(ErrorKind::Parse, "text section '", name, "' is truncated");
        ck.texts_.emplace_back(name, std::move(body));
      } else if (kind == "tensor") {
        std::size_t rank = 0;
        if (!(head >> rank) || rank == 0) fail(ErrorKind::Parse, "bad tensor header '", line, "'");
        Shape shape(rank);
        for (auto& d : shape) {
          if (!(head >> d) || d == 0) fail(ErrorKind::Parse, "bad tensor dims in '", line, "'");
        }
        std::vector<double> values(shape_size(shape));
        for (double& v : values) {
          unsigned char bytes[8];
          if (!in.read(reinterpret_cast<char*>(bytes), 8)) fail(ErrorKind::Parse, "tensor '", name, "' is truncated");
          std::uint64_t bits = 0;
          for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
          v = std::bit_cast<double>(bits);
        }
        if (in.get() != '\n') fail(ErrorKind::Parse, "tensor '", name, "' is truncated");
        ck.tensors_.emplace_back(name, Tensor(std::move(shape), std::move(values)));
      } else {
        fail(ErrorKind::Parse, "unknown checkpoint section '", kind, "'");
      }
    }
    fail(ErrorKind::Parse, "checkpoint ends without 'end' marker");
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Data, "cannot open checkpoint '", path, "'");
    return read(in);
  }

 private:
  static void check_name(const std::string& name) {
    if (name.empty() || name.find_first_of(" \t\n\r") != std::string::npos) {
      fail(ErrorKind::Config, "invalid checkpoint section name '", name, "'");
    }
  }

  template <typename T>
  static void put(std::vector<std::pair<std::string, T>>& items, const std::string& name, T value) {
    for (auto& [n, v] : items) {
      if (n == name) {
        v = std::move(value);
        return;
      }
    }
    items.emplace_back(name, std::move(value));
  }

  template <typename T>
  static const T* find(const std::vector<std::pair<std::string, T>>& items, const std::string& name) {
    for (const auto& [n, v] : items) {
      if (n == name) return &v;
    }
    return nullptr;
  }

  std::vector<std::pair<std::string, std::string>> texts_;
  std::vector<std::pair<std::string, Tensor>> tensors_;
};

inline void store_optimizer(Checkpoint& ck, const OptimizerState& state) {
  std::ostringstream oss;
  oss.precision(17);
  const auto& c = state.config;
  oss << "kind=" << to_string(c.kind) << "\nlearning_rate=" << c.learning_rate << "\ndecay=" << c.decay
      << "\nbeta1=" << c.beta1 << "\nbeta2=" << c.beta2 << "\nrho=" << c.rho << "\nepsilon=" << c.epsilon
      << "\nstep=" << state.step_count << "\nslots=" << state.slots.size() << '\n';
  ck.put_text("optimizer", oss.str());
  for (std::size_t i = 0; i < state.slots.size(); ++i) {
    const auto& s = state.slots[i];
    if (s.first.empty()) continue;
    ck.put_tensor("optimizer/" + std::to_string(i) + "/first", Tensor({s.first.size()}, s.first));
    ck.put_tensor("optimizer/" + std::to_string(i) + "/second", Tensor({s.second.size()}, s.second));
  }
}

inline OptimizerState load_optimizer(const Checkpoint& ck) {
  std::map<std::string, std::string> kv;
  std::istringstream in(ck.text("optimizer"));
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto num = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) fail(ErrorKind::Parse, "optimizer section lacks '", key, "'");
    return std::stod(it->second);
  };
  OptimizerConfig cfg;
  cfg.kind = parse_optimizer_kind(kv["kind"]);
  cfg.learning_rate = num("learning_rate");
  cfg.decay = num("decay");
  cfg.beta1 = num("beta1");
  cfg.beta2 = num("beta2");
  cfg.rho = num("rho");
  cfg.epsilon = num("epsilon");
  OptimizerState state(cfg);
  state.step_count = static_cast<long>(num("step"));
  const auto n = static_cast<std::size_t>(num("slots"));
  state.slots.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string base = "optimizer/" + std::to_string(i);
    if (!ck.has_tensor(base + "/first")) continue;
    auto f = ck.tensor(base + "/first").values();
    auto s = ck.tensor(base + "/second").values();
    state.slots[i].first.assign(f.begin(), f.end());
    state.slots[i].second.assign(s.begin(), s.end());
  }
  return state;
}

}  // namespace sforge
