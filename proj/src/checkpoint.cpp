/*
 * Copyright 2026 The FedL2G Simulator Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
// Checkpoint layout (all integers little-endian, reals IEEE-754 binary64):
//
//   char[8]  magic "FL2GCKPT"
//   u32      format version (1)
//   u64      seed
//   u32      method id
//   u32      completed rounds
//   u32      client count
//   u8       payload kind (0 none, 1 guiding vectors, 2 prototypes)
//   payload  see WritePayload
//   clients  per client: u32 index, u64 P, P x f64
//   history  u32 count, then per round see WriteMetrics
//
// Random streams are keyed by (seed, purpose, client, round), so the round
// counter is the only generator state that needs saving.

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "fedl2g/federation.hpp"

namespace fedl2g {
namespace {

constexpr char kMagic[8] = {'F', 'L', '2', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  void U8(std::uint8_t v) { os_.put(static_cast<char>(v)); }
  void U32(std::uint32_t v) { Bytes(v, 4); }
  void U64(std::uint64_t v) { Bytes(v, 8); }
  void I32(std::int32_t v) { U32(static_cast<std::uint32_t>(v)); }
  void I64(std::int64_t v) { U64(static_cast<std::uint64_t>(v)); }
  void F64(double v) { U64(std::bit_cast<std::uint64_t>(v)); }

 private:
  void Bytes(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) os_.put(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::ostream& os_;
};

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  std::uint8_t U8() { return static_cast<std::uint8_t>(Bytes(1)); }
  std::uint32_t U32() { return static_cast<std::uint32_t>(Bytes(4)); }
  std::uint64_t U64() { return Bytes(8); }
  std::int32_t I32() { return static_cast<std::int32_t>(U32()); }
  std::int64_t I64() { return static_cast<std::int64_t>(U64()); }
  double F64() { return std::bit_cast<double>(U64()); }

 private:
  std::uint64_t Bytes(int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      const int c = is_.get();
      if (c == std::char_traits<char>::eof()) {
        throw std::runtime_error("checkpoint truncated");
      }
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
  }
  std::istream& is_;
};

void WriteMatrix(Writer& w, const Eigen::MatrixXd& m) {
  w.U32(static_cast<std::uint32_t>(m.rows()));
  w.U32(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.F64(m(r, c));
  }
}

Eigen::MatrixXd ReadMatrix(Reader& r, const Eigen::MatrixXd& expected_shape) {
  const auto rows = r.U32();
  const auto cols = r.U32();
  if (rows != expected_shape.rows() || cols != expected_shape.cols()) {
    throw std::runtime_error("checkpoint payload shape mismatch");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.F64();
  }
  return m;
}

void WriteMetrics(Writer& w, const RoundMetrics& m) {
  w.I32(m.round);
  w.U8(m.evaluated ? 1 : 0);
  w.F64(m.accuracy);
  w.U32(static_cast<std::uint32_t>(m.client_accuracy.size()));
  for (double a : m.client_accuracy) w.F64(a);
  w.F64(m.mean_ce);
  w.F64(m.loss_increase);
  w.U64(m.upload_bytes);
  w.U64(m.download_bytes);
  w.F64(m.grad_norm_sq);
  w.F64(m.wall_seconds);
  w.U32(static_cast<std::uint32_t>(m.trace.participants.size()));
  for (std::size_t k = 0; k < m.trace.participants.size(); ++k) {
    w.I32(m.trace.participants[k]);
    w.I32(m.trace.uploaded_rows[k]);
  }
}

RoundMetrics ReadMetrics(Reader& r) {
  RoundMetrics m;
  m.round = r.I32();
  m.evaluated = r.U8() != 0;
  m.accuracy = r.F64();
  m.client_accuracy.resize(r.U32());
  for (double& a : m.client_accuracy) a = r.F64();
  m.mean_ce = r.F64();
  m.loss_increase = r.F64();
  m.upload_bytes = r.U64();
  m.download_bytes = r.U64();
  m.grad_norm_sq = r.F64();
  m.wall_seconds = r.F64();
  const auto n = r.U32();
  for (std::uint32_t k = 0; k < n; ++k) {
    m.trace.participants.push_back(r.I32());
    m.trace.uploaded_rows.push_back(r.I32());
  }
  return m;
}

}  // namespace

void SaveCheckpoint(const std::filesystem::path& path, const RunConfig& config,
                    const ServerState& server,
                    const std::vector<ClientState>& clients,
                    const std::vector<RoundMetrics>& history) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  Writer w(os);
  os.write(kMagic, sizeof(kMagic));
  w.U32(kFormatVersion);
  w.U64(config.seed);
  w.U32(static_cast<std::uint32_t>(config.method));
  w.U32(static_cast<std::uint32_t>(server.round));
  w.U32(static_cast<std::uint32_t>(clients.size()));

  if (const auto* g = std::get_if<GuidingVectorSet>(&server.payload)) {
    w.U8(1);
    w.U32(static_cast<std::uint32_t>(g->space));
    w.I32(g->version);
    WriteMatrix(w, g->vectors);
  } else if (const auto* p = std::get_if<PrototypeSet>(&server.payload)) {
    w.U8(2);
    w.U32(static_cast<std::uint32_t>(p->space));
    WriteMatrix(w, p->vectors);
    for (long n : p->counts) w.I64(n);
  } else {
    w.U8(0);
  }

  for (const auto& c : clients) {
    w.U32(static_cast<std::uint32_t>(c.index));
    w.U64(static_cast<std::uint64_t>(c.params.flat.size()));
    for (Eigen::Index k = 0; k < c.params.flat.size(); ++k) w.F64(c.params.flat[k]);
  }
  w.U32(static_cast<std::uint32_t>(history.size()));
  for (const auto& m : history) WriteMetrics(w, m);
  if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

void LoadCheckpoint(const std::filesystem::path& path, const RunConfig& config,
                    ServerState& server, std::vector<ClientState>& clients,
                    std::vector<RoundMetrics>& history) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path.string() + " is not a checkpoint");
  }
  Reader r(is);
  if (r.U32() != kFormatVersion) throw std::runtime_error("unsupported checkpoint version");
  if (r.U64() != config.seed) throw std::runtime_error("checkpoint seed differs from config");
  if (r.U32() != static_cast<std::uint32_t>(config.method)) {
    throw std::runtime_error("checkpoint method differs from config");
  }
  const auto round = r.U32();
  if (round > static_cast<std::uint32_t>(config.rounds)) {
    throw std::runtime_error("checkpoint is past the configured round count");
  }
  if (r.U32() != clients.size()) throw std::runtime_error("checkpoint client count differs");

  ServerState loaded = server;
  loaded.round = static_cast<int>(round);
  const auto kind = r.U8();
  if (auto* g = std::get_if<GuidingVectorSet>(&loaded.payload)) {
    if (kind != 1) throw std::runtime_error("checkpoint payload kind mismatch");
    if (r.U32() != static_cast<std::uint32_t>(g->space)) {
      throw std::runtime_error("checkpoint space mismatch");
    }
    g->version = r.I32();
    g->vectors = ReadMatrix(r, g->vectors);
  } else if (auto* p = std::get_if<PrototypeSet>(&loaded.payload)) {
    if (kind != 2) throw std::runtime_error("checkpoint payload kind mismatch");
    if (r.U32() != static_cast<std::uint32_t>(p->space)) {
      throw std::runtime_error("checkpoint space mismatch");
    }
    p->vectors = ReadMatrix(r, p->vectors);
    for (long& n : p->counts) n = static_cast<long>(r.I64());
  } else if (kind != 0) {
    throw std::runtime_error("checkpoint payload kind mismatch");
  }

  std::vector<Eigen::VectorXd> params;
  for (const auto& c : clients) {
    if (r.U32() != static_cast<std::uint32_t>(c.index)) {
      throw std::runtime_error("checkpoint client order mismatch");
    }
    const auto p = r.U64();
    if (p != static_cast<std::uint64_t>(c.params.flat.size())) {
      throw std::runtime_error("checkpoint parameter count mismatch for client " +
                               std::to_string(c.index));
    }
    Eigen::VectorXd flat(static_cast<Eigen::Index>(p));
    for (Eigen::Index k = 0; k < flat.size(); ++k) flat[k] = r.F64();
    params.push_back(std::move(flat));
  }
  std::vector<RoundMetrics> loaded_history(r.U32());
  for (auto& m : loaded_history) m = ReadMetrics(r);
  if (loaded_history.size() != round) {
    throw std::runtime_error("checkpoint history length differs from round count");
  }

  server = std::move(loaded);
  for (std::size_t i = 0; i < clients.size(); ++i) clients[i].params.flat = std::move(params[i]);
  history = std::move(loaded_history);
}

}  // namespace fedl2g
