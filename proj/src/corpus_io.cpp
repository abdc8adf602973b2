#include "sirst/corpus_io.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "sirst/error.hpp"

namespace sirst {

namespace fs = std::filesystem;

namespace {

std::string issues_message(const std::vector<LoadIssue>& issues) {
    std::string msg = "corpus load failed:";
    for (const LoadIssue& i : issues) {
        msg += "\n  ";
        if (!i.image_id.empty()) msg += "[" + i.image_id + "] ";
        msg += i.message;
    }
    return msg;
}

// Reads the next header token, skipping whitespace and comments.
std::string header_token(const std::string& data, std::size_t& pos) {
    while (pos < data.size()) {
        if (data[pos] == '#') {
            while (pos < data.size() && data[pos] != '\n') ++pos;
        } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
            ++pos;
        } else {
            break;
        }
    }
    const std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos])) && data[pos] != '#') ++pos;
    return data.substr(start, pos - start);
}

std::size_t parse_positive(const std::string& tok, const char* what) {
    if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
        throw std::runtime_error(std::string("invalid PGM ") + what + ": '" + tok + "'");
    const unsigned long long v = std::stoull(tok);
    if (v == 0) throw std::runtime_error(std::string("PGM ") + what + " must be positive");
    return static_cast<std::size_t>(v);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

LoadError::LoadError(std::vector<LoadIssue> issues)
    : std::runtime_error(issues_message(issues)), issues_(std::move(issues)) {}

PgmImage read_pgm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    if (header_token(data, pos) != "P5") throw std::runtime_error(path.string() + ": not a binary PGM (P5)");
    PgmImage img;
    img.width = parse_positive(header_token(data, pos), "width");
    img.height = parse_positive(header_token(data, pos), "height");
    const std::size_t maxval = parse_positive(header_token(data, pos), "maxval");
    if (maxval > 65535) throw std::runtime_error(path.string() + ": maxval above 65535");
    img.maxval = static_cast<std::uint32_t>(maxval);
    if (pos >= data.size()) throw std::runtime_error(path.string() + ": truncated header");
    ++pos;  // single whitespace before the raster

    const std::size_t n = img.width * img.height;
    const std::size_t bytes = img.maxval < 256 ? 1 : 2;
    if (data.size() - pos < n * bytes)
        throw std::runtime_error(path.string() + ": raster truncated");
    img.pixels.resize(n);
    const auto* raw = reinterpret_cast<const unsigned char*>(data.data() + pos);
    for (std::size_t i = 0; i < n; ++i) {
        img.pixels[i] = bytes == 1 ? raw[i] : static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
        if (img.pixels[i] > img.maxval) throw std::runtime_error(path.string() + ": sample exceeds maxval");
    }
    return img;
}

void write_pgm(const fs::path& path, const PgmImage& img) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "P5\n" << img.width << ' ' << img.height << '\n' << img.maxval << '\n';
    std::string raster;
    if (img.maxval < 256) {
        raster.reserve(img.pixels.size());
        for (std::uint16_t p : img.pixels) raster.push_back(static_cast<char>(p));
    } else {
        raster.reserve(2 * img.pixels.size());
        for (std::uint16_t p : img.pixels) {
            raster.push_back(static_cast<char>(p >> 8));
            raster.push_back(static_cast<char>(p & 0xFF));
        }
    }
    out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

ProbMap prob_map_from_pgm(const PgmImage& img) {
    BitDepth depth;
    if (img.maxval == 255)
        depth = BitDepth::k8;
    else if (img.maxval == 65535)
        depth = BitDepth::k16;
    else
        throw InvalidArgument("unsupported bit depth: maxval " + std::to_string(img.maxval) +
                              " (expected 255 or 65535)");
    return prob_map_from_levels(img.height, img.width, img.pixels, depth);
}

BinaryMask mask_from_pgm(const PgmImage& img) {
    BinaryMask m(img.height, img.width);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) m.bits[i] = img.pixels[i] > 0 ? 1 : 0;
    return m;
}

PgmImage pgm_from_prob_map(const ProbMap& map, BitDepth depth) {
    if (depth == BitDepth::kContinuous) depth = BitDepth::k16;
    PgmImage img{map.height, map.width, max_level(depth), std::vector<std::uint16_t>(map.size())};
    for (std::size_t i = 0; i < map.size(); ++i)
        img.pixels[i] = static_cast<std::uint16_t>(level_of(map.values[i], img.maxval));
    return img;
}

PgmImage pgm_from_mask(const BinaryMask& mask) {
    PgmImage img{mask.height, mask.width, 255, std::vector<std::uint16_t>(mask.size())};
    for (std::size_t i = 0; i < mask.size(); ++i) img.pixels[i] = mask.bits[i] ? 255 : 0;
    return img;
}

CorpusManifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError({LoadIssue{"", "cannot open manifest " + path.string()}});
    CorpusManifest m;
    m.root = path.parent_path();
    std::vector<LoadIssue> issues;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            const std::string body = trim(t.substr(1));
            const std::string key = "format_version:";
            if (body.rfind(key, 0) == 0) m.format_version = trim(body.substr(key.size()));
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, '\t')) fields.push_back(trim(f));
        if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
            issues.push_back(LoadIssue{"", path.string() + ":" + std::to_string(lineno) +
                                               ": expected image_id<TAB>pred_path<TAB>gt_path"});
            continue;
        }
        if (!ids.insert(fields[0]).second) {
            issues.push_back(LoadIssue{fields[0], "duplicate image_id at line " + std::to_string(lineno)});
            continue;
        }
        m.entries.push_back(ManifestEntry{fields[0], fields[1], fields[2]});
    }
    if (!issues.empty()) throw LoadError(std::move(issues));
    return m;
}

void write_manifest(const fs::path& path, const CorpusManifest& m) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "# format_version: " << m.format_version << '\n';
    out << "# image_id\tpred_path\tgt_path\n";
    for (const ManifestEntry& e : m.entries)
        out << e.image_id << '\t' << e.pred_path.generic_string() << '\t' << e.gt_path.generic_string() << '\n';
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

Corpus load_corpus(const fs::path& manifest_path) {
    const CorpusManifest m = read_manifest(manifest_path);
    std::vector<LoadIssue> issues;
    Corpus corpus;
    corpus.reserve(m.entries.size());
    auto resolve = [&](const fs::path& p) { return p.is_absolute() ? p : m.root / p; };
    for (const ManifestEntry& e : m.entries) {
        const fs::path pred_path = resolve(e.pred_path);
        const fs::path gt_path = resolve(e.gt_path);
        bool ok = true;
        for (const fs::path& p : {pred_path, gt_path}) {
            if (!fs::exists(p)) {
                issues.push_back(LoadIssue{e.image_id, "missing file " + p.string()});
                ok = false;
            }
        }
        if (!ok) continue;
        try {
            ProbMap pred = prob_map_from_pgm(read_pgm(pred_path));
            BinaryMask gt = mask_from_pgm(read_pgm(gt_path));
            if (pred.height != gt.height || pred.width != gt.width) {
                issues.push_back(LoadIssue{e.image_id, "dimension mismatch: prediction " +
                                                           std::to_string(pred.width) + "x" + std::to_string(pred.height) +
                                                           ", ground truth " + std::to_string(gt.width) + "x" +
                                                           std::to_string(gt.height)});
                continue;
            }
            corpus.push_back(CorpusItem{e.image_id, std::move(pred), std::move(gt)});
        } catch (const std::exception& ex) {
            issues.push_back(LoadIssue{e.image_id, ex.what()});
        }
    }
    if (!issues.empty()) throw LoadError(std::move(issues));
    if (corpus.empty()) throw LoadError({LoadIssue{"", "manifest lists no images: " + manifest_path.string()}});
    return corpus;
}

fs::path write_corpus(const fs::path& dir, const Corpus& corpus, BitDepth depth) {
    fs::create_directories(dir / "pred");
    fs::create_directories(dir / "gt");
    CorpusManifest m;
    m.root = dir;
    for (const CorpusItem& item : corpus) {
        const BitDepth d = item.pred.bit_depth == BitDepth::kContinuous ? depth : item.pred.bit_depth;
        const fs::path pred = fs::path("pred") / (item.image_id + ".pgm");
        const fs::path gt = fs::path("gt") / (item.image_id + ".pgm");
        write_pgm(dir / pred, pgm_from_prob_map(item.pred, d));
        write_pgm(dir / gt, pgm_from_mask(item.gt));
        m.entries.push_back(ManifestEntry{item.image_id, pred, gt});
    }
    const fs::path manifest = dir / "manifest.tsv";
    write_manifest(manifest, m);
    return manifest;
}

}  // namespace sirst
