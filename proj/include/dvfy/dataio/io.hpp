#pragma once

#include <filesystem>
#include <iosfwd>

#include "dvfy/dataio/dataset.hpp"

namespace dvfy::data {

// DVTS1 text:   header `DVTS1 channels=<c> window=<w> classes=<C>`, then one
//               record per line: `id,y,true_domain,v_0,...,v_{c*w-1}` with
//               true_domain -1 when absent and values channel-major.
// DVTS1B:       same header tag `DVTS1B`; each record is the line
//               `id,y,true_domain` followed by c*w little-endian float32 values.
enum class DatasetEncoding { kText, kBinary };

void write_dataset(std::ostream& os, const SegmentDataset& dataset, DatasetEncoding encoding = DatasetEncoding::kText);
/// Throws kParse naming the line or record on malformed input.
SegmentDataset read_dataset(std::istream& is);

void save_dataset(const std::filesystem::path& path, const SegmentDataset& dataset,
                  DatasetEncoding encoding = DatasetEncoding::kText);
SegmentDataset load_dataset(const std::filesystem::path& path);

}  // namespace dvfy::data
