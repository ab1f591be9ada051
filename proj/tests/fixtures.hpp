#pragma once

#include "rrlstm/pipeline.hpp"
#include "rrlstm/synth.hpp"

namespace fixture {

/// Small 3-year synthetic watershed: gages g01 (relevant) and g02, g03 (noise),
/// gap-free, each year cut to its first `days` days.
inline rrlstm::DatasetSplit toy_split(std::size_t days = 20, std::uint64_t seed = 5) {
    rrlstm::SynthConfig c;
    c.n_gages = 3;
    c.n_relevant = 1;
    c.storm_rate = 1.0;
    c.missing_rate = 0.0;
    c.seed = seed;
    const rrlstm::SynthDataset ds = rrlstm::generate(c);
    const rrlstm::SplitResult s = rrlstm::impute_and_split(ds.frame);
    rrlstm::DatasetSplit split = rrlstm::split_by_year(s.segments);
    const std::size_t n = days * rrlstm::kStepsPerDay;
    for (auto* part : {&split.train, &split.validation, &split.test}) {
        for (auto& seg : *part) seg = seg.slice(0, std::min(n, seg.length()));
    }
    return split;
}

}  // namespace fixture
