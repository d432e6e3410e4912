#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hda/models.hpp"
#include "hda/tensor.hpp"

namespace hda {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Which labels a dataset hands out. Training views only expose the
/// budgeted labels; evaluation views expose every known label.
enum class LabelAccess { kTraining, kEvaluation };

/// Images of one domain shape, stored channels-first and contiguous, with
/// optional labels. A label can be known but hidden (unlabeled for training).
class DomainDataset {
 public:
  DomainDataset() = default;
  DomainDataset(DomainShape shape, std::vector<std::string> class_names);

  /// Appends one C×H×W image with values in [0, 1].
  void add(std::span<const float> image, std::optional<int> label, bool label_visible = true);

  const DomainShape& shape() const { return shape_; }
  std::size_t size() const { return visible_.size(); }
  bool empty() const { return visible_.empty(); }
  std::size_t num_classes() const { return class_names_.size(); }
  const std::vector<std::string>& class_names() const { return class_names_; }

  std::span<const float> image(std::size_t i) const;
  /// N×C×H×W batch of the given samples.
  Tensor batch(std::span<const std::size_t> indices) const;
  Tensor all() const;

  /// Label under the current access mode; nullopt when unknown or hidden.
  std::optional<int> label(std::size_t i) const;
  bool is_labeled(std::size_t i) const { return visible_.at(i) != 0; }
  std::vector<std::size_t> labeled_indices() const;
  std::vector<std::size_t> unlabeled_indices() const;
  std::size_t labeled_count() const;
  /// Every known label regardless of visibility exists for each sample.
  bool fully_annotated() const;

  LabelAccess access() const { return access_; }
  DomainDataset with_access(LabelAccess access) const;
  DomainDataset evaluation_view() const { return with_access(LabelAccess::kEvaluation); }

  /// Per-class labeled budget recorded by split_and_budget (0 when unset).
  std::size_t labeled_per_class() const { return labeled_per_class_; }
  void set_labeled_per_class(std::size_t n) { labeled_per_class_ = n; }

  /// Copy holding only the listed samples, in that order.
  DomainDataset subset(std::span<const std::size_t> indices) const;

  bool operator==(const DomainDataset&) const = default;

 private:
  std::optional<int> stored_label(std::size_t i) const;

  DomainShape shape_;
  std::vector<std::string> class_names_;
  std::vector<float> pixels_;
  std::vector<int> labels_;            // -1 when unknown
  std::vector<std::uint8_t> visible_;  // label usable for training
  std::size_t labeled_per_class_ = 0;
  LabelAccess access_ = LabelAccess::kTraining;
};

struct SyntheticSpec {
  std::size_t num_classes = 4;
  std::size_t per_class = 50;
  DomainShape source{16, 16, 1};
  DomainShape target{8, 8, 3};
  std::uint64_t seed = 1;
};

enum class TextureFamily { kStripes, kBlobs, kCheckerboard };

/// Texture family and parameter for class c: families cycle stripes, blobs,
/// checkerboard; the k-th class of a family gets the k-th angle, density or
/// period from fixed tables.
struct TextureClass {
  TextureFamily family;
  double parameter;  // stripe angle (degrees), blob count, checker cells per side
};
TextureClass texture_class(std::size_t class_id);
std::string texture_class_name(std::size_t class_id);

/// Source rendering is sharp; target rendering is blurred, channel-mixed and
/// noisy (sigma 0.05). The two datasets share class ids and names.
std::pair<DomainDataset, DomainDataset> generate_synthetic_pair(const SyntheticSpec& spec);

struct ClassMapping {
  std::string class_name;
  std::vector<std::string> folders;
};

/// "crop:AnnualCrop+PermanentCrop,forest:Forest" → mappings.
std::vector<ClassMapping> parse_class_map(const std::string& text);

struct IngestResult {
  DomainDataset dataset;
  std::size_t skipped = 0;  // undecodable files
};

/// Loads <root>/<folder>/*.png, resizes bilinearly to `shape`, replicates a
/// single channel or drops channels beyond `shape.channels`, scales to [0, 1].
/// Several folders mapped to one class are merged. Files are visited in
/// lexicographic order.
IngestResult ingest_image_folder(const std::filesystem::path& root, const DomainShape& shape,
                                 const std::vector<ClassMapping>& class_map);

struct SplitSpec {
  std::size_t train_per_class = 40;
  std::size_t val_per_class = 10;
  std::uint64_t seed = 1;
};

/// Stratified split; in train exactly `n_labeled` samples per class keep a
/// visible label, the rest are hidden. Val is fully labeled.
std::pair<DomainDataset, DomainDataset> split_and_budget(const DomainDataset& ds, const SplitSpec& spec,
                                                         std::size_t n_labeled);

/// Provenance tag for items of an assembled training set.
enum class Provenance : std::uint8_t { kLabeledTarget = 0, kTransferredSource = 1, kPseudoLabeledTarget = 2 };

/// HDAD dump: "HDAD", u16 version, u32 count, u32 height/width/channels,
/// u8 flags (bit 0 labels, bit 1 provenance), then per sample f32 LE C×H×W
/// values, u16 label when flagged, u8 provenance when flagged.
void save_hdad(const std::filesystem::path& path, const DomainDataset& ds,
               std::span<const Provenance> provenance = {});
struct HdadContents {
  DomainDataset dataset;
  std::vector<Provenance> provenance;
};
HdadContents load_hdad(const std::filesystem::path& path);

inline constexpr std::uint16_t kHdadVersion = 1;

}  // namespace hda
