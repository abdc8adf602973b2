#pragma once

#include <string>
#include <vector>

#include "sirst/mask_core.hpp"

namespace sirst {

// One evaluated image: prediction map and ground-truth mask.
struct CorpusItem {
    std::string image_id;
    ProbMap pred;
    BinaryMask gt;
};

using Corpus = std::vector<CorpusItem>;

}  // namespace sirst
