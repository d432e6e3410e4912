#include <algorithm>
#include <fstream>

#include "hda/binary_io.hpp"
#include "hda/data.hpp"
#include "hda/rng.hpp"

namespace hda {

DomainDataset::DomainDataset(DomainShape shape, std::vector<std::string> class_names)
    : shape_(shape), class_names_(std::move(class_names)) {}

void DomainDataset::add(std::span<const float> image, std::optional<int> label, bool label_visible) {
  if (image.size() != shape_.numel()) {
    throw DataError("image of " + std::to_string(image.size()) + " values does not match shape " + to_string(shape_));
  }
  for (float v : image) {
    if (!(v >= 0.0f && v <= 1.0f)) throw DataError("image values must lie in [0, 1]");
  }
  if (label && (*label < 0 || static_cast<std::size_t>(*label) >= class_names_.size())) {
    throw DataError("label " + std::to_string(*label) + " outside [0, " + std::to_string(class_names_.size()) + ")");
  }
  pixels_.insert(pixels_.end(), image.begin(), image.end());
  labels_.push_back(label.value_or(-1));
  visible_.push_back(label && label_visible ? 1 : 0);
}

std::span<const float> DomainDataset::image(std::size_t i) const {
  if (i >= size()) throw std::out_of_range("sample index " + std::to_string(i) + " out of range");
  return std::span<const float>(pixels_).subspan(i * shape_.numel(), shape_.numel());
}

Tensor DomainDataset::batch(std::span<const std::size_t> indices) const {
  const std::size_t per = shape_.numel();
  std::vector<float> values(indices.size() * per);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto img = image(indices[k]);
    std::copy(img.begin(), img.end(), values.begin() + k * per);
  }
  return Tensor({indices.size(), shape_.channels, shape_.height, shape_.width}, std::move(values));
}

Tensor DomainDataset::all() const {
  std::vector<std::size_t> idx(size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return batch(idx);
}

std::optional<int> DomainDataset::stored_label(std::size_t i) const {
  const int l = labels_.at(i);
  return l < 0 ? std::nullopt : std::optional<int>(l);
}

std::optional<int> DomainDataset::label(std::size_t i) const {
  if (access_ == LabelAccess::kEvaluation) return stored_label(i);
  return visible_.at(i) ? stored_label(i) : std::nullopt;
}

std::vector<std::size_t> DomainDataset::labeled_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (visible_[i]) out.push_back(i);
  return out;
}

std::vector<std::size_t> DomainDataset::unlabeled_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (!visible_[i]) out.push_back(i);
  return out;
}

std::size_t DomainDataset::labeled_count() const {
  return static_cast<std::size_t>(std::count(visible_.begin(), visible_.end(), std::uint8_t{1}));
}

bool DomainDataset::fully_annotated() const {
  return std::all_of(labels_.begin(), labels_.end(), [](int l) { return l >= 0; });
}

DomainDataset DomainDataset::with_access(LabelAccess access) const {
  DomainDataset copy = *this;
  copy.access_ = access;
  return copy;
}

DomainDataset DomainDataset::subset(std::span<const std::size_t> indices) const {
  DomainDataset out(shape_, class_names_);
  out.access_ = access_;
  out.labeled_per_class_ = labeled_per_class_;
  out.pixels_.reserve(indices.size() * shape_.numel());
  for (std::size_t i : indices) {
    const auto img = image(i);
    out.pixels_.insert(out.pixels_.end(), img.begin(), img.end());
    out.labels_.push_back(labels_[i]);
    out.visible_.push_back(visible_[i]);
  }
  return out;
}

std::pair<DomainDataset, DomainDataset> split_and_budget(const DomainDataset& ds, const SplitSpec& spec,
                                                         std::size_t n_labeled) {
  if (n_labeled > spec.train_per_class) {
    throw DataError("label budget " + std::to_string(n_labeled) + " exceeds train_per_class " +
                    std::to_string(spec.train_per_class));
  }
  const DomainDataset full = ds.evaluation_view();
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes());
  for (std::size_t i = 0; i < full.size(); ++i) {
    const auto l = full.label(i);
    if (!l) throw DataError("split_and_budget needs every sample to carry a label");
    by_class[static_cast<std::size_t>(*l)].push_back(i);
  }

  std::vector<std::size_t> train_idx, val_idx;
  std::vector<std::uint8_t> train_visible;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (spec.train_per_class + spec.val_per_class > members.size()) {
      throw DataError("class '" + ds.class_names()[c] + "' has " + std::to_string(members.size()) +
                      " samples, split needs " + std::to_string(spec.train_per_class + spec.val_per_class));
    }
    Rng rng(derive_seed(spec.seed, c));
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t k = 0; k < spec.train_per_class; ++k) {
      train_idx.push_back(members[k]);
      train_visible.push_back(k < n_labeled ? 1 : 0);
    }
    for (std::size_t k = 0; k < spec.val_per_class; ++k) val_idx.push_back(members[spec.train_per_class + k]);
  }

  DomainDataset train(ds.shape(), ds.class_names());
  for (std::size_t k = 0; k < train_idx.size(); ++k) {
    train.add(full.image(train_idx[k]), full.label(train_idx[k]), train_visible[k] != 0);
  }
  train.set_labeled_per_class(n_labeled);
  DomainDataset val(ds.shape(), ds.class_names());
  for (std::size_t i : val_idx) val.add(full.image(i), full.label(i), true);
  val.set_labeled_per_class(spec.val_per_class);
  return {std::move(train), std::move(val)};
}

namespace {

constexpr std::uint8_t kFlagLabels = 1;
constexpr std::uint8_t kFlagProvenance = 2;
constexpr std::uint16_t kNoLabel = 0xFFFF;

}  // namespace

void save_hdad(const std::filesystem::path& path, const DomainDataset& ds, std::span<const Provenance> provenance) {
  if (!provenance.empty() && provenance.size() != ds.size()) {
    throw DataError("provenance list does not match dataset size");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  // Labels are written as the dataset's access mode exposes them.
  bool any_label = false;
  for (std::size_t i = 0; i < ds.size() && !any_label; ++i) any_label = ds.label(i).has_value();
  std::uint8_t flags = any_label ? kFlagLabels : 0;
  if (!provenance.empty()) flags |= kFlagProvenance;

  binio::write_bytes(out, "HDAD");
  binio::write_le<std::uint16_t>(out, kHdadVersion);
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.size()));
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.shape().height));
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.shape().width));
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.shape().channels));
  binio::write_le<std::uint8_t>(out, flags);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (float v : ds.image(i)) binio::write_f32(out, v);
    if (flags & kFlagLabels) {
      const auto l = ds.label(i);
      binio::write_le<std::uint16_t>(out, l ? static_cast<std::uint16_t>(*l) : kNoLabel);
    }
    if (flags & kFlagProvenance) binio::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(provenance[i]));
  }
  if (!out.flush()) throw DataError("failed writing '" + path.string() + "'");
}

HdadContents load_hdad(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    if (binio::read_bytes(in, 4) != "HDAD") throw DataError("'" + path.string() + "' is not an HDAD dump");
    const auto version = binio::read_le<std::uint16_t>(in);
    if (version != kHdadVersion) throw DataError("unsupported HDAD version " + std::to_string(version));
    const auto count = binio::read_le<std::uint32_t>(in);
    DomainShape shape;
    shape.height = binio::read_le<std::uint32_t>(in);
    shape.width = binio::read_le<std::uint32_t>(in);
    shape.channels = binio::read_le<std::uint32_t>(in);
    const auto flags = binio::read_le<std::uint8_t>(in);

    std::vector<std::vector<float>> images(count, std::vector<float>(shape.numel()));
    std::vector<int> labels(count, -1);
    HdadContents result;
    int max_label = -1;
    for (std::uint32_t i = 0; i < count; ++i) {
      for (float& v : images[i]) v = binio::read_f32(in);
      if (flags & kFlagLabels) {
        const auto l = binio::read_le<std::uint16_t>(in);
        if (l != kNoLabel) {
          labels[i] = l;
          max_label = std::max<int>(max_label, l);
        }
      }
      if (flags & kFlagProvenance) {
        const auto p = binio::read_le<std::uint8_t>(in);
        if (p > 2) throw DataError("invalid provenance byte " + std::to_string(p));
        result.provenance.push_back(static_cast<Provenance>(p));
      }
    }
    std::vector<std::string> names;
    for (int c = 0; c <= max_label; ++c) names.push_back("class" + std::to_string(c));
    result.dataset = DomainDataset(shape, std::move(names));
    for (std::uint32_t i = 0; i < count; ++i) {
      result.dataset.add(images[i], labels[i] < 0 ? std::nullopt : std::optional<int>(labels[i]));
    }
    return result;
  } catch (const binio::TruncatedError&) {
    throw DataError("'" + path.string() + "' is truncated");
  }
}

}  // namespace hda
