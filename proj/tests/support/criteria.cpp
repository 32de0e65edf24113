#include "criteria.hpp"

#include "oracles.hpp"

#include "crowdtrend/annotations.hpp"
#include "crowdtrend/classifier.hpp"
#include "crowdtrend/filterlang.hpp"
#include "crowdtrend/labelqueue.hpp"
#include "crowdtrend/platform.hpp"
#include "crowdtrend/random.hpp"
#include "crowdtrend/simulation.hpp"
#include "crowdtrend/store.hpp"
#include "crowdtrend/trends.hpp"

#include <json.hpp>

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

namespace criteria {

using namespace crowdtrend;
using json = nlohmann::json;

namespace {

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

FilterQuery build(const oracle::QNode& q) {
    switch (q.kind) {
        case oracle::QNode::Kw: return FilterQuery::keyword(q.phrase);
        case oracle::QNode::Not: return FilterQuery::negate(build(q.kids[0]));
        case oracle::QNode::And:
        case oracle::QNode::Or: {
            std::vector<FilterQuery> kids;
            for (const auto& k : q.kids) kids.push_back(build(k));
            return q.kind == oracle::QNode::And ? FilterQuery::all_of(std::move(kids))
                                                : FilterQuery::any_of(std::move(kids));
        }
    }
    throw std::logic_error("bad node");
}

}  // namespace

// ---------------------------------------------------------------------------

Outcome query_oracle(std::size_t trees, std::size_t token_lists, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::vector<std::string>> lists(token_lists);
    for (auto& l : lists) l = oracle::random_tokens(rng);

    std::size_t evaluations = 0, mismatches = 0, round_trip_failures = 0, max_depth = 0;
    std::string first_problem;
    for (std::size_t t = 0; t < trees; ++t) {
        const auto tree = oracle::random_query(rng, 6);
        max_depth = std::max<std::size_t>(max_depth, static_cast<std::size_t>(oracle::depth(tree)));
        const FilterQuery built = build(tree);
        const std::string text = oracle::print(tree);

        bool trip_ok = false;
        try {
            const FilterQuery parsed = parse_query(text);
            const std::string printed = print_query(built);
            trip_ok = parsed == built && printed == text && parse_query(printed) == built;
        } catch (const std::exception& e) {
            if (first_problem.empty()) first_problem = text + ": " + e.what();
        }
        if (!trip_ok) {
            ++round_trip_failures;
            if (first_problem.empty()) first_problem = "round trip: " + text;
        }
        for (const auto& tokens : lists) {
            ++evaluations;
            if (matches(built, TokenizedText{tokens}) != oracle::eval(tree, tokens)) {
                if (mismatches++ == 0 && first_problem.empty()) first_problem = "mismatch on " + text;
            }
        }
    }
    Outcome o;
    o.pass = mismatches == 0 && round_trip_failures == 0;
    o.detail = fmt("%zu evaluations, %zu mismatches, %zu round-trip failures, max depth %zu", evaluations, mismatches,
                   round_trip_failures, max_depth);
    if (!first_problem.empty()) o.detail += "; first: " + first_problem;
    return o;
}

// ---------------------------------------------------------------------------

Outcome queue_oracle(std::size_t sequences, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::size_t ops_total = 0, evictions = 0, divergent = 0;
    std::string first_problem;
    const double alphas[] = {0.0, 0.3, 0.5, 1.0};
    const int halflife_h[] = {1, 12, 24};
    const double us[] = {0.0, 0.25, 0.5, 0.75, 1.0};

    for (std::size_t s = 0; s < sequences; ++s) {
        QueueConfig cfg;
        cfg.capacity = 1 + rng() % 16;
        cfg.alpha = alphas[rng() % 4];
        cfg.recency_halflife = std::chrono::hours{halflife_h[rng() % 3]};
        cfg.consensus_k = 1 + rng() % 3;
        cfg.lease = std::chrono::minutes{10};
        LabelQueue q(cfg);
        oracle::RefQueue ref{cfg.capacity, cfg.alpha, to_millis(Timestamp{cfg.recency_halflife}), cfg.consensus_k,
                             600'000, {}, 0};

        std::int64_t now = 1'600'000'000'000;
        const std::size_t ops = 1 + rng() % 200;
        std::size_t next_doc = 0;
        bool ok = true;
        std::string where;
        for (std::size_t i = 0; i < ops && ok; ++i) {
            now += static_cast<std::int64_t>(rng() % 4) * 60'000 * (rng() % 3 == 0 ? 3 : 1);
            const auto op = rng() % 10;
            std::string user = "u" + std::to_string(rng() % 5);
            if (op < 5) {
                std::string doc = rng() % 8 == 0 && next_doc > 0 ? "d" + std::to_string(rng() % next_doc)
                                                                 : "d" + std::to_string(next_doc++);
                const std::int64_t created = now - static_cast<std::int64_t>(rng() % 5) * 3'600'000;
                const double u = rng() % 2 ? us[rng() % 5] : static_cast<double>(rng() % 1000) / 999.0;
                const auto got = q.offer(doc, from_millis(created), u, from_millis(now));
                const auto want = ref.offer(doc, created, u, now);
                std::string g = got.status == OfferStatus::Accepted   ? "accepted"
                                : got.status == OfferStatus::Rejected ? "rejected"
                                                                      : "evicted:" + got.evicted.value_or("?");
                if (got.status == OfferStatus::AcceptedWithEviction) ++evictions;
                if (g != want) {
                    ok = false;
                    where = fmt("op %zu offer %s: got %s want %s", i, doc.c_str(), g.c_str(), want.c_str());
                }
            } else if (op < 8) {
                const auto got = q.next_for_user(user, from_millis(now));
                const auto want = ref.next(user, now);
                if (got != want) {
                    ok = false;
                    where = fmt("op %zu next %s: got %s want %s", i, user.c_str(), got.value_or("none").c_str(),
                                want.value_or("none").c_str());
                }
            } else {
                std::string doc;
                std::vector<std::pair<std::string, std::string>> held;
                for (const auto& e : ref.entries)
                    for (const auto& [u, until] : e.lease_until) held.emplace_back(u, e.doc);
                if (!held.empty() && rng() % 3 != 0) {
                    const auto& pick = held[rng() % held.size()];
                    user = pick.first;
                    doc = pick.second;
                } else if (!ref.entries.empty() && rng() % 4 != 0) {
                    doc = ref.entries[rng() % ref.entries.size()].doc;
                } else {
                    doc = "d" + std::to_string(next_doc ? rng() % next_doc : 0);
                }
                const auto got = q.complete(user, doc, from_millis(now));
                const auto want = ref.complete(user, doc, now);
                std::string g = got == CompleteStatus::Pending          ? "pending"
                                : got == CompleteStatus::ConsensusReady ? "ready"
                                                                        : "rejected";
                if (g != want) {
                    ok = false;
                    where = fmt("op %zu complete %s/%s: got %s want %s", i, user.c_str(), doc.c_str(), g.c_str(),
                                want.c_str());
                }
            }
            ++ops_total;
        }
        if (ok) {
            // Final contents, label counts and completed sets.
            if (q.size() != ref.entries.size()) {
                ok = false;
                where = fmt("final size %zu vs %zu", q.size(), ref.entries.size());
            }
            for (const auto& e : ref.entries) {
                if (!ok) break;
                auto got = q.entry(e.doc);
                if (!got || got->users_completed != e.completed || got->labels_received != e.completed.size()) {
                    ok = false;
                    where = "final entry " + e.doc;
                }
            }
        }
        if (!ok) {
            if (divergent++ == 0) first_problem = fmt("sequence %zu: ", s) + where;
        }
    }
    Outcome o;
    o.pass = divergent == 0;
    o.detail = fmt("%zu sequences, %zu ops, %zu evictions, %zu divergent", sequences, ops_total, evictions, divergent);
    if (!first_problem.empty()) o.detail += "; first: " + first_problem;
    return o;
}

// ---------------------------------------------------------------------------

Outcome gradient_check(std::size_t instances, std::uint64_t seed) {
    constexpr std::size_t C = 3, D = 50, N = 20;
    const double h = 1e-5;
    std::mt19937_64 rng(seed);
    double worst = 0, worst_loss_gap = 0;
    for (std::size_t inst = 0; inst < instances; ++inst) {
        Model model(1, D, {TrendClass::Positive, TrendClass::Negative, TrendClass::Neutral});
        auto W = model.mutable_weights();
        auto B = model.mutable_biases();
        for (auto& w : W) w = 0.5 * rnd::normal(rng);
        for (auto& b : B) b = 0.5 * rnd::normal(rng);
        const double l2 = 0.01 * static_cast<double>(rng() % 10);

        std::vector<LabelledExample> examples;
        std::vector<oracle::DenseExample> dense;
        for (std::size_t n = 0; n < N; ++n) {
            std::map<std::uint32_t, double> feats;
            const std::size_t nnz = 1 + rng() % 8;
            for (std::size_t k = 0; k < nnz; ++k) feats[static_cast<std::uint32_t>(rng() % D)] += 1.0;
            LabelledExample ex;
            ex.doc_id = "x" + std::to_string(n);
            for (auto [j, v] : feats) ex.features.entries.emplace_back(j, v);
            const std::size_t y = rng() % C;
            ex.label = model.classes()[y];
            ex.weight = 0.5 + rnd::uniform01(rng) * 1.5;
            dense.push_back({ex.features.entries, y, ex.weight});
            examples.push_back(std::move(ex));
        }

        const auto lg = loss_and_gradient(model, examples, l2);
        std::vector<double> w(model.weights().begin(), model.weights().end());
        std::vector<double> b(model.biases().begin(), model.biases().end());
        worst_loss_gap = std::max(worst_loss_gap, std::abs(lg.loss - oracle::loss(w, b, C, D, dense, l2)));

        double diff2 = 0, sum2 = 0;
        auto probe = [&](std::vector<double>& param, std::size_t i, double analytic) {
            const double keep = param[i];
            param[i] = keep + h;
            const double up = oracle::loss(w, b, C, D, dense, l2);
            param[i] = keep - h;
            const double down = oracle::loss(w, b, C, D, dense, l2);
            param[i] = keep;
            const double numeric = (up - down) / (2 * h);
            diff2 += (analytic - numeric) * (analytic - numeric);
            sum2 += (std::abs(analytic) + std::abs(numeric)) * (std::abs(analytic) + std::abs(numeric));
        };
        for (std::size_t i = 0; i < w.size(); ++i) probe(w, i, lg.weights[i]);
        for (std::size_t i = 0; i < b.size(); ++i) probe(b, i, lg.biases[i]);
        const double rel = sum2 > 0 ? std::sqrt(diff2) / std::sqrt(sum2) : 0.0;
        worst = std::max(worst, rel);
    }
    Outcome o;
    o.pass = worst <= 1e-4 && worst_loss_gap <= 1e-9;
    o.detail = fmt("%zu instances (C=3, D=50, 20 examples), worst relative error %.3g, worst loss gap vs oracle %.3g",
                   instances, worst, worst_loss_gap);
    return o;
}

// ---------------------------------------------------------------------------

namespace {

std::string separable_doc(std::mt19937_64& rng, const std::string& prefix) {
    std::string s;
    const std::size_t n = 6 + rng() % 5;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + prefix + std::to_string(rng() % 40);
    return s;
}

double accuracy(const Model& m, const std::vector<LabelledExample>& xs) {
    std::size_t right = 0;
    for (const auto& x : xs) right += m.argmax_class(m.predict(x.features)) == x.label;
    return static_cast<double>(right) / static_cast<double>(xs.size());
}

}  // namespace

Outcome separable_fixture(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto make = [&](std::size_t n) {
        std::vector<LabelledExample> out;
        for (std::size_t i = 0; i < n; ++i) {
            const bool a = i % 2 == 0;
            const std::string text = separable_doc(rng, a ? "apricot" : "basalt");
            out.push_back({"s" + std::to_string(i), featurize(text), a ? TrendClass::Positive : TrendClass::Negative});
        }
        return out;
    };
    const auto train_set = make(200);
    const auto test_set = make(100);
    const Hyperparams hp{};
    const Model m1 = train(train_set, hp, seed, 1);
    const Model m2 = train(train_set, hp, seed, 1);
    const double tr = accuracy(m1, train_set);
    const double te = accuracy(m1, test_set);
    Outcome o;
    o.pass = tr >= 0.98 && te >= 0.95 && m1 == m2;
    o.detail = fmt("train accuracy %.4f (>= 0.98), held-out %.4f (>= 0.95), rerun identical: %s", tr, te,
                   m1 == m2 ? "yes" : "no");
    return o;
}

// ---------------------------------------------------------------------------

Outcome active_learning(std::size_t seeds) {
    std::vector<SimulationResult> unc, ran;
    for (std::uint64_t s = 1; s <= seeds; ++s) {
        SimulationOptions opt;
        opt.seed = s;
        opt.strategy = SelectionStrategy::Uncertainty;
        unc.push_back(run_simulation(opt));
        opt.strategy = SelectionStrategy::Random;
        ran.push_back(run_simulation(opt));
    }
    const std::size_t budget = SimulationOptions{}.budget;
    auto median = [&](const std::vector<SimulationResult>& rs) {
        std::vector<double> v;
        for (const auto& r : rs) v.push_back(static_cast<double>(r.labels_to_target.value_or(budget + 1)));
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
    };
    const double mu = median(unc), mr = median(ran);
    std::size_t reached_u = 0, reached_r = 0;
    for (const auto& r : unc) reached_u += r.labels_to_target.has_value();
    for (const auto& r : ran) reached_r += r.labels_to_target.has_value();
    Outcome o;
    o.pass = mu <= mr;
    o.detail = fmt("%zu seeds: median labels to 0.9 accuracy, uncertainty %.1f vs random %.1f, ratio %.3f "
                   "(reached %zu/%zu vs %zu/%zu)",
                   seeds, mu, mr, mr > 0 ? mu / mr : 0.0, reached_u, seeds, reached_r, seeds);
    return o;
}

// ---------------------------------------------------------------------------

Outcome trend_oracle(std::size_t series, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double worst = 0;
    std::size_t points = 0;
    const IndexParams params{};
    for (std::size_t s = 0; s < series; ++s) {
        const std::size_t len = 1 + rng() % 500;
        // Standalone functions on a real-valued series.
        std::vector<double> x(len);
        for (auto& v : x) v = rng() % 3 == 0 ? 0.0 : rnd::uniform01(rng) * 50;
        const std::size_t windows[] = {1, 24, 168, 1 + rng() % 600};
        for (std::size_t w : windows) {
            for (std::size_t at = 0; at < len; ++at)
                worst = std::max(worst, std::abs(moving_average(x, w, at) - oracle::trailing_mean(x, w, at)));
        }
        std::vector<double> r(len);
        for (std::size_t i = 0; i < len; ++i) {
            const double eps = 0.5 + rnd::uniform01(rng);
            const double p = x[i], n = x[len - 1 - i];
            r[i] = sentiment_ratio(p, n, eps);
            worst = std::max(worst, std::abs(r[i] - oracle::ratio(p, n, eps)));
        }
        if (rng() % 10 == 0) std::fill(r.begin(), r.end(), 1.5);
        const auto idx = sentiment_index(r);
        const auto want = oracle::standardize(r);
        for (std::size_t i = 0; i < len; ++i) worst = std::max(worst, std::abs(idx[i] - want[i]));

        // Accumulator query path on integer class counts.
        TrendAccumulator acc;
        std::array<std::vector<double>, kTrendClassCount> cls;
        for (auto& c : cls) c.assign(len, 0.0);
        const std::int64_t base = 400'000 + static_cast<std::int64_t>(rng() % 1000);
        for (std::size_t i = 0; i < len; ++i) {
            for (std::size_t c = 0; c < kTrendClassCount; ++c) {
                const auto n = rng() % 4 == 0 ? 0 : rng() % 6;
                for (std::size_t k = 0; k < n; ++k) {
                    const auto offset = static_cast<std::int64_t>(rng() % 3'600'000);
                    acc.record(bucket_start(base + static_cast<std::int64_t>(i)) + Duration{offset},
                               kAllTrendClasses[c]);
                }
                cls[c][i] = static_cast<double>(n);
            }
        }
        const Timestamp from = bucket_start(base), to = bucket_start(base + static_cast<std::int64_t>(len));
        const auto pts = acc.query(from, to, to, params);
        if (pts.size() != len) return {false, fmt("series %zu: query returned %zu points, expected %zu", s, pts.size(), len)};
        std::vector<double> rr(len);
        for (std::size_t i = 0; i < len; ++i) {
            for (std::size_t c = 0; c < kTrendClassCount; ++c) {
                worst = std::max(worst, std::abs(static_cast<double>(pts[i].counts[c]) - cls[c][i]));
                worst = std::max(worst, std::abs(pts[i].ma_short[c] - oracle::trailing_mean(cls[c], 24, i)));
                worst = std::max(worst, std::abs(pts[i].ma_long[c] - oracle::trailing_mean(cls[c], 168, i)));
            }
            rr[i] = oracle::ratio(oracle::trailing_mean(cls[0], 168, i), oracle::trailing_mean(cls[1], 168, i),
                                  params.epsilon);
            worst = std::max(worst, std::abs(pts[i].r - rr[i]));
        }
        const auto want_idx = oracle::standardize(rr);
        for (std::size_t i = 0; i < len; ++i) worst = std::max(worst, std::abs(pts[i].index - want_idx[i]));
        points += len;
    }
    Outcome o;
    o.pass = worst <= 1e-9;
    o.detail = fmt("%zu series, %zu query points, worst deviation %.3g (<= 1e-9)", series, points, worst);
    return o;
}

Outcome planted_shift(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Timestamp start = from_millis(1'614'556'800'000);  // 2021-03-01T00:00:00Z
    const Timestamp shift = start + std::chrono::days{10};
    const Timestamp end = start + std::chrono::days{20};
    TrendAccumulator acc;
    std::size_t docs = 0;
    for (Timestamp t = start;;) {
        t += Duration{static_cast<std::int64_t>(rnd::exponential(rng, 864'000.0))};  // ~100 per day
        if (t >= end) break;
        const double pos_share = t < shift ? 2.0 / 3.0 : 1.0 / 3.0;
        acc.record(t, rnd::bernoulli(rng, pos_share) ? TrendClass::Positive : TrendClass::Negative);
        ++docs;
    }
    const auto pts = acc.query(start, end, end, IndexParams{});
    std::optional<Timestamp> crossing;
    bool positive_before = false;
    for (const auto& p : pts) {
        if (p.bucket_start < shift) {
            positive_before = p.index > 0;
            continue;
        }
        if (p.index <= 0) {
            crossing = p.bucket_start;
            break;
        }
    }
    Outcome o;
    if (!crossing) {
        o.detail = fmt("%zu docs; index never crossed zero after the shift", docs);
        return o;
    }
    const double days = std::chrono::duration<double, std::ratio<86400>>(*crossing - shift).count();
    o.pass = positive_before && days <= 7.0;
    o.detail = fmt("%zu docs; index %s before the shift, crosses zero %.2f days after it (<= 7)", docs,
                   positive_before ? "positive" : "NOT positive", days);
    return o;
}

// ---------------------------------------------------------------------------

Outcome consensus_oracle(std::size_t multisets, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Timestamp now = from_millis(1'614'556'800'000);
    std::map<std::size_t, std::pair<std::unique_ptr<LabelQueue>, std::unique_ptr<AnnotationBook>>> books;
    auto book_for = [&](std::size_t k) -> AnnotationBook& {
        auto& slot = books[k];
        if (!slot.second) {
            json cfg = {{"id", "votes"},
                        {"keywords", {"x"}},
                        {"questions",
                         {{{"id", "sentiment"},
                           {"answers", {{{"id", "pos"}}, {{"id", "neg"}}, {{"id", "neu"}}, {{"id", "irr"}}}}}}},
                        {"sentiment_question", "sentiment"},
                        {"class_map",
                         {{{"question", "sentiment"}, {"answer", "pos"}, {"class", "positive"}},
                          {{"question", "sentiment"}, {"answer", "neg"}, {"class", "negative"}},
                          {{"question", "sentiment"}, {"answer", "neu"}, {"class", "neutral"}},
                          {{"question", "sentiment"}, {"answer", "irr"}, {"class", "irrelevant"}}}},
                        {"queue", {{"consensus_k", k}}}};
            auto project = std::make_shared<const Project>(parse_project(cfg));
            slot.first = std::make_unique<LabelQueue>(project->queue);
            slot.second = std::make_unique<AnnotationBook>(project, *slot.first, AnnotationSink{});
        }
        return *slot.second;
    };
    const char* answer_ids[] = {"pos", "neg", "neu", "irr"};

    std::size_t agree = 0, decided = 0;
    std::string first_problem;
    for (std::size_t m = 0; m < multisets; ++m) {
        const std::size_t n = 1 + rng() % 9;
        const std::size_t spread = 1 + rng() % 4;  // number of classes votes are drawn from
        std::vector<TrendClass> votes(n);
        for (auto& v : votes) v = kAllTrendClasses[rng() % spread];
        auto& book = book_for(n);
        auto& queue = *books[n].first;
        const std::string doc = "m" + std::to_string(m);
        queue.offer(doc, now, 0.5, now);

        std::optional<ConsensusLabel> got;
        for (std::size_t i = 0; i < n; ++i) {
            const std::string user = "v" + std::to_string(i);
            auto s = book.start_session(user, now);
            if (!s || s->doc_id != doc) break;
            auto out = book.submit_answer(user, doc, "sentiment", answer_ids[index_of(votes[i])], now);
            if (out.consensus) got = out.consensus;
        }
        const auto want = oracle::majority(votes);
        std::size_t support = 0;
        if (want)
            for (auto v : votes) support += v == *want;
        const bool ok = got && got->label == want && got->total == n && (!want || got->support == support);
        if (ok) {
            ++agree;
            decided += want.has_value();
        } else if (first_problem.empty()) {
            first_problem = fmt("multiset %zu (n=%zu) disagreed", m, n);
        }
    }
    Outcome o;
    o.pass = agree == multisets;
    o.detail = fmt("%zu/%zu multisets agree (%zu decided, %zu undecided)", agree, multisets, decided,
                   multisets - decided);
    if (!first_problem.empty()) o.detail += "; first: " + first_problem;
    return o;
}

// ---------------------------------------------------------------------------

namespace {

pid_t spawn(const std::vector<std::string>& args) {
    std::vector<char*> argv;
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    const pid_t pid = ::fork();
    if (pid == 0) {
        const int devnull = ::open("/dev/null", O_WRONLY);
        if (devnull >= 0) {
            ::dup2(devnull, 1);
            ::dup2(devnull, 2);
        }
        ::execv(argv[0], argv.data());
        ::_exit(127);
    }
    return pid;
}

int run(const std::vector<std::string>& args) {
    const pid_t pid = spawn(args);
    int status = 0;
    ::waitpid(pid, &status, 0);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct RunFacts {
    std::map<std::string, std::string> consensus;
    std::vector<std::string> models;  // model JSON in publication order
    std::string csv;
    std::uint64_t events = 0;
};

/// Reads the raw log directly rather than going through the platform.
RunFacts facts(const std::filesystem::path& dir) {
    RunFacts f;
    const auto scan = scan_log(dir / "events.log");
    f.events = scan.records.size();
    for (const auto& r : scan.records) {
        if (r.kind == EventKind::Consensus)
            f.consensus[r.payload.at("doc_id").get<std::string>()] = r.payload.at("label").dump();
        if (r.kind == EventKind::ModelPublished) f.models.push_back(r.payload.at("model").dump());
    }
    f.csv = slurp(dir / "trends.csv");
    return f;
}

}  // namespace

Outcome end_to_end(const EndToEndPaths& p, std::uint64_t kill_seed) {
    namespace fs = std::filesystem;
    fs::remove_all(p.workdir);
    fs::create_directories(p.workdir);
    const std::string project_id = "vaccine-sentiment";

    auto ingest_args = [&](const fs::path& dir) {
        return std::vector<std::string>{p.cli.string(),     "--data-dir",        dir.string(),
                                        "ingest",           "--source",          p.fixture.string(),
                                        "--project",        p.project_config.string(),
                                        "--clock",          "simulated",         "--annotators",
                                        "3",                "--max-retrains",    "2"};
    };

    std::vector<RunFacts> runs;
    for (const char* name : {"run-a", "run-b"}) {
        const fs::path dir = p.workdir / name;
        if (run(ingest_args(dir)) != 0) return {false, std::string("ingest failed in ") + name};
        if (run({p.cli.string(), "--data-dir", dir.string(), "trends", "export", "--project", project_id, "--out",
                 (dir / "trends.csv").string()}) != 0)
            return {false, std::string("trend export failed in ") + name};
        runs.push_back(facts(dir));
    }
    const auto& a = runs[0];
    const auto& b = runs[1];
    const bool same_consensus = a.consensus == b.consensus;
    const bool same_models = a.models == b.models;
    const bool same_csv = a.csv == b.csv;
    const bool enough = a.consensus.size() > 0 && a.models.size() == 2 && !a.csv.empty();

    // Kill a third run at a random point, then verify the log.
    std::mt19937_64 rng(kill_seed);
    const auto delay = std::chrono::milliseconds{20 + static_cast<std::int64_t>(rng() % 1000)};
    const fs::path dir_c = p.workdir / "run-killed";
    const pid_t pid = spawn(ingest_args(dir_c));
    std::this_thread::sleep_for(delay);
    const bool killed = ::kill(pid, SIGKILL) == 0;
    int status = 0;
    ::waitpid(pid, &status, 0);
    const bool died_by_kill = WIFSIGNALED(status);
    const ReplayReport report = replay_check(dir_c);

    Outcome o;
    o.pass = same_consensus && same_models && same_csv && enough && report.ok;
    o.detail = fmt("rerun identical: consensus %s (%zu labels), models %s (%zu published), trend CSV %s (%zu bytes); "
                   "kill after %lld ms (%s): replay-check %s over %llu events",
                   same_consensus ? "yes" : "NO", a.consensus.size(), same_models ? "yes" : "NO", a.models.size(),
                   same_csv ? "yes" : "NO", a.csv.size(), static_cast<long long>(delay.count()),
                   killed && died_by_kill ? "killed mid-run" : "finished before the signal",
                   report.ok ? "OK" : "FAILED", static_cast<unsigned long long>(report.events));
    for (const auto& prob : report.problems) o.detail += "; " + prob;
    return o;
}

}  // namespace criteria
