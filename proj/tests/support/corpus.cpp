#include "corpus.hpp"

#include "dnmx/extract/labeling.hpp"
#include "dnmx/extract/patterns.hpp"

namespace dnmx::testing {

LabeledCorpus labeled_corpus(const std::vector<MarketId>& markets, std::size_t per_market, double noise,
                             std::uint64_t corpus_seed, std::uint64_t split_seed) {
    sim::CorpusConfig cfg;
    for (auto m : markets) cfg.counts[m] = per_market;
    cfg.noise_rate = noise;
    cfg.seed = corpus_seed;
    const auto corpus = sim::generate_corpus(cfg);
    const auto patterns = extract::PatternSet::defaults();
    LabeledCorpus out;
    std::vector<dataset::PageRef> refs;
    for (const auto& p : corpus.listings) {
        out.listings.push_back(
            dataset::to_listing(extract::annotate_page(p.page_id, p.market_id, p.language, p.html, patterns)));
        refs.push_back({p.page_id, p.market_id});
    }
    out.split = dataset::split(refs, 0.8, split_seed);
    return out;
}

} // namespace dnmx::testing
