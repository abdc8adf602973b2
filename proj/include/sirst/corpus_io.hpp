#pragma once
// Corpus files: binary PGM (P5, 8/16-bit) images and the tab-separated
// manifest `image_id <TAB> pred_path <TAB> gt_path`.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "sirst/corpus.hpp"
#include "sirst/mask_core.hpp"

namespace sirst {

inline constexpr const char* kManifestFormatVersion = "1";

struct PgmImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::uint32_t maxval = 255;
    std::vector<std::uint16_t> pixels;  // row-major
};

struct LoadIssue {
    std::string image_id;  // empty for manifest-level problems
    std::string message;
};

// Every problem found while loading, itemized per image.
class LoadError : public std::runtime_error {
public:
    explicit LoadError(std::vector<LoadIssue> issues);
    const std::vector<LoadIssue>& issues() const { return issues_; }

private:
    std::vector<LoadIssue> issues_;
};

// Throws std::runtime_error describing the first format problem.
PgmImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const PgmImage& image);

// maxval 255 -> 8-bit, 65535 -> 16-bit; other depths are rejected.
ProbMap prob_map_from_pgm(const PgmImage& image);
// True exactly where the pixel is non-zero.
BinaryMask mask_from_pgm(const PgmImage& image);
PgmImage pgm_from_prob_map(const ProbMap& map, BitDepth depth);
PgmImage pgm_from_mask(const BinaryMask& mask);

struct ManifestEntry {
    std::string image_id;
    std::filesystem::path pred_path;  // relative paths resolve against root
    std::filesystem::path gt_path;
};

struct CorpusManifest {
    std::filesystem::path root;
    std::string format_version = kManifestFormatVersion;
    std::vector<ManifestEntry> entries;
};

// Blank lines and `#` comments are skipped; `# format_version: <v>` sets the version.
CorpusManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const CorpusManifest& manifest);

// Throws LoadError listing every missing file, decode failure, unsupported
// depth and dimension mismatch.
Corpus load_corpus(const std::filesystem::path& manifest_path);

// Writes pred/<id>.pgm, gt/<id>.pgm and manifest.tsv under `dir`.
// Continuous maps are stored at `depth`.
std::filesystem::path write_corpus(const std::filesystem::path& dir, const Corpus& corpus,
                                   BitDepth depth = BitDepth::k16);

}  // namespace sirst
