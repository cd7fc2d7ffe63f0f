#include <bit>
#include <cstring>

#include "fuse2d/cnn.hpp"
#include "fuse2d/error.hpp"
#include "text_io.hpp"

namespace fuse2d {

namespace {

constexpr char kMagic[4] = {'F', '2', 'D', 'M'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError("model file is truncated");
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint16_t u16() {
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(u8()) << (8 * i);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

void write_block(Writer& w, const std::vector<float>& xs) {
  w.u32(static_cast<std::uint32_t>(xs.size()));
  for (float v : xs) w.f32(v);
}

void read_block(Reader& r, std::vector<float>& xs, std::size_t layer) {
  const auto n = r.u32();
  if (n != xs.size()) {
    throw FormatError("layer " + std::to_string(layer) + ": parameter block has " + std::to_string(n) +
                      " values, expected " + std::to_string(xs.size()));
  }
  r.need(static_cast<std::size_t>(n) * 4);
  for (auto& v : xs) v = r.f32();
}

}  // namespace

std::string serialize_model(const Model& model) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u16(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(model.input.height));
  w.u32(static_cast<std::uint32_t>(model.input.width));
  w.u32(static_cast<std::uint32_t>(model.input.channels));
  w.u32(static_cast<std::uint32_t>(model.layers.size()));
  for (const auto& l : model.layers) {
    w.u8(static_cast<std::uint8_t>(l.spec.kind));
    w.u8(static_cast<std::uint8_t>(l.spec.activation));
    w.u32(static_cast<std::uint32_t>(l.spec.units));
  }
  for (const auto& l : model.layers) {
    if (!l.spec.has_parameters()) continue;
    write_block(w, l.weights);
    write_block(w, l.bias);
  }
  for (const auto& l : model.layers) w.u8(l.frozen ? 1 : 0);
  return w.take();
}

Model deserialize_model(std::string_view bytes) {
  Reader r(bytes);
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError("not a model file (bad magic)");
  }
  r.take(sizeof kMagic);
  const auto version = r.u16();
  if (version != kModelFormatVersion) {
    throw FormatError("unsupported model format version " + std::to_string(version));
  }
  Shape input;
  input.height = static_cast<int>(r.u32());
  input.width = static_cast<int>(r.u32());
  input.channels = static_cast<int>(r.u32());
  const auto count = r.u32();
  if (count > 4096) throw FormatError("implausible layer count " + std::to_string(count));
  std::vector<LayerSpec> arch;
  for (std::uint32_t i = 0; i < count; ++i) {
    LayerSpec s;
    const auto kind = r.u8();
    const auto act = r.u8();
    if (kind > static_cast<std::uint8_t>(LayerKind::Softmax) || act > static_cast<std::uint8_t>(Activation::ReLU)) {
      throw FormatError("layer " + std::to_string(i) + ": unknown kind or activation");
    }
    s.kind = static_cast<LayerKind>(kind);
    s.activation = static_cast<Activation>(act);
    s.units = static_cast<int>(r.u32());
    arch.push_back(s);
  }
  Model model;
  try {
    model = init_model<float>(arch, input, 0);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid layer table: ") + e.what());
  }
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    auto& l = model.layers[i];
    if (!l.spec.has_parameters()) continue;
    read_block(r, l.weights, i);
    read_block(r, l.bias, i);
  }
  for (auto& l : model.layers) {
    const auto f = r.u8();
    if (f > 1) throw FormatError("bad freeze flag");
    l.frozen = f == 1;
  }
  if (!r.done()) throw FormatError("trailing bytes after model data");
  return model;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  detail::write_file(path, serialize_model(model));
}

Model load_model(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  try {
    return deserialize_model(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace fuse2d
