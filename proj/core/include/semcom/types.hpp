#pragma once

#include <vector>

namespace semcom {

// Ordered tuple of codeword indices: the discrete semantic representation
// that crosses the module boundary between codecs and phy.
struct SemanticMessage {
    std::vector<int> indices;

    bool operator==(const SemanticMessage& o) const { return indices == o.indices; }
};

}  // namespace semcom
