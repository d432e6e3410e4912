#include "hda/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "hda/binary_io.hpp"

namespace hda {

namespace {

void write_string(std::ostream& out, const std::string& s) {
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  binio::write_bytes(out, s);
}

std::string read_string(std::istream& in) {
  const auto n = binio::read_le<std::uint32_t>(in);
  if (n > (1u << 20)) throw CheckpointError("implausible string length " + std::to_string(n));
  return binio::read_bytes(in, n);
}

struct StoredEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Network& network, bool with_optimizer) {
  std::ostringstream out(std::ios::binary);
  binio::write_bytes(out, "HDAC");
  binio::write_le<std::uint16_t>(out, kHdacVersion);
  write_string(out, network.name);
  const auto entries = network.params.entries();
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    write_string(out, e.name);
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rank()));
    for (std::size_t d : e.value.shape()) binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (float v : e.value.data()) binio::write_f32(out, v);
  }
  if (with_optimizer) {
    const auto& adam = network.params.optimizer_state();
    binio::write_bytes(out, "ADAM");
    binio::write_le<std::int64_t>(out, adam.step);
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(adam.first.size()));
    for (std::size_t k = 0; k < adam.first.size(); ++k) {
      binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(adam.first[k].size()));
      for (float v : adam.first[k]) binio::write_f32(out, v);
      for (float v : adam.second[k]) binio::write_f32(out, v);
    }
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw CheckpointError("cannot open '" + path.string() + "' for writing");
  const std::string bytes = out.str();
  file.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!file.flush()) throw CheckpointError("failed writing '" + path.string() + "'");
}

void load_checkpoint(const std::filesystem::path& path, Network& network) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  const std::string where = "'" + path.string() + "': ";
  std::vector<StoredEntry> stored;
  std::optional<ParameterSet::AdamState> adam;
  try {
    if (binio::read_bytes(in, 4) != "HDAC") throw CheckpointError(where + "not an HDAC checkpoint");
    const auto version = binio::read_le<std::uint16_t>(in);
    if (version != kHdacVersion) throw CheckpointError(where + "unsupported version " + std::to_string(version));
    const std::string name = read_string(in);
    if (name != network.name) {
      throw CheckpointError(where + "holds network '" + name + "', expected '" + network.name + "'");
    }
    const auto count = binio::read_le<std::uint32_t>(in);
    if (count != network.params.size()) {
      throw CheckpointError(where + std::to_string(count) + " entries, architecture has " +
                            std::to_string(network.params.size()));
    }
    for (std::uint32_t k = 0; k < count; ++k) {
      StoredEntry e;
      e.name = read_string(in);
      const auto rank = binio::read_le<std::uint32_t>(in);
      if (rank > 8) throw CheckpointError(where + "implausible rank for '" + e.name + "'");
      for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(binio::read_le<std::uint32_t>(in));
      const auto& expected = network.params.entries()[k];
      if (e.name != expected.name || e.shape != expected.value.shape()) {
        throw CheckpointError(where + "entry " + std::to_string(k) + " is '" + e.name + "' " + to_string(e.shape) +
                              ", architecture expects '" + expected.name + "' " + to_string(expected.value.shape()));
      }
      e.values.resize(numel(e.shape));
      for (float& v : e.values) v = binio::read_f32(in);
      stored.push_back(std::move(e));
    }
    if (in.peek() != std::char_traits<char>::eof()) {
      if (binio::read_bytes(in, 4) != "ADAM") throw CheckpointError(where + "unknown trailing section");
      ParameterSet::AdamState state;
      state.step = binio::read_le<std::int64_t>(in);
      const auto slots = binio::read_le<std::uint32_t>(in);
      std::vector<std::size_t> trainable_sizes;
      for (const auto& e : network.params.entries())
        if (e.trainable) trainable_sizes.push_back(e.value.numel());
      if (slots != 0 && slots != trainable_sizes.size()) {
        throw CheckpointError(where + "optimizer state has " + std::to_string(slots) + " slots, expected " +
                              std::to_string(trainable_sizes.size()));
      }
      for (std::uint32_t k = 0; k < slots; ++k) {
        const auto n = binio::read_le<std::uint32_t>(in);
        if (n != trainable_sizes[k]) throw CheckpointError(where + "optimizer slot size mismatch");
        std::vector<float> first(n), second(n);
        for (float& v : first) v = binio::read_f32(in);
        for (float& v : second) v = binio::read_f32(in);
        state.first.push_back(std::move(first));
        state.second.push_back(std::move(second));
      }
      if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError(where + "trailing bytes");
      adam = std::move(state);
    }
  } catch (const binio::TruncatedError&) {
    throw CheckpointError(where + "truncated");
  }

  auto entries = network.params.entries();
  for (std::size_t k = 0; k < stored.size(); ++k) {
    auto dst = entries[k].value.mutable_data();
    std::copy(stored[k].values.begin(), stored[k].values.end(), dst.begin());
  }
  network.params.optimizer_state() = adam.value_or(ParameterSet::AdamState{});
}

void save_bundle(const std::filesystem::path& dir, const ModelBundle& bundle) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw CheckpointError("cannot create '" + dir.string() + "': " + ec.message());
  for (const Network* net : bundle.training_networks()) save_checkpoint(dir / (net->name + ".hdac"), *net);
}

void load_bundle(const std::filesystem::path& dir, ModelBundle& bundle) {
  for (Network* net : bundle.training_networks()) load_checkpoint(dir / (net->name + ".hdac"), *net);
}

}  // namespace hda
