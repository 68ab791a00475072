#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "veridpo/rng.hpp"
#include "veridpo/verifier.hpp"

using namespace veridpo;
using verifier::DeltaConvention;
using verifier::Verdict;
using verifier::VerifierLogits;

TEST_CASE("decode worked examples") {
    auto d1 = verifier::decode({0.1, 1.5, 0.0}, -0.34);
    CHECK(d1.verdict == Verdict::NotSupported);
    CHECK(d1.margin == doctest::Approx(1.06).epsilon(1e-12));

    auto d2 = verifier::decode({2.0, 1.0, 0.0}, -0.34);
    CHECK(d2.verdict == Verdict::Supported);

    auto d3 = verifier::decode({0.0, 0.0, 0.0}, 0.0);
    CHECK(d3.verdict == Verdict::Supported);  // all-equal tie resolves to A
}

TEST_CASE("decode rejects non-finite logits") {
    CHECK_THROWS_AS(verifier::decode({std::numeric_limits<double>::quiet_NaN(), 0, 0}, 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(verifier::decode({0, std::numeric_limits<double>::infinity(), 0}, 0.0),
                    std::invalid_argument);
}

TEST_CASE("decode with zero bias is plain argmax with fixed tie order") {
    SplitMix64 rng(3);
    for (int i = 0; i < 200; ++i) {
        VerifierLogits l{rng.uniform_real(-3, 3), rng.uniform_real(-3, 3),
                         rng.uniform_real(-3, 3)};
        auto d = verifier::decode(l, 0.0);
        const double v[3] = {l.l_a, l.l_b, l.l_c};
        int best = 0;
        for (int k = 1; k < 3; ++k) {
            if (v[k] > v[best]) best = k;
        }
        CHECK(static_cast<int>(d.verdict) == best);
    }
}

TEST_CASE("shift invariance: adding a constant to all logits changes nothing") {
    SplitMix64 rng(9);
    for (int i = 0; i < 200; ++i) {
        VerifierLogits l{rng.uniform_real(-2, 2), rng.uniform_real(-2, 2),
                         rng.uniform_real(-2, 2)};
        const double c = rng.uniform_real(-5, 5);
        VerifierLogits shifted{l.l_a + c, l.l_b + c, l.l_c + c};
        auto d1 = verifier::decode(l, -0.34);
        auto d2 = verifier::decode(shifted, -0.34);
        CHECK(d1.verdict == d2.verdict);
        CHECK(d1.margin == doctest::Approx(d2.margin).epsilon(1e-9));
    }
}

TEST_CASE("bias monotonicity: once B, always B for larger bias") {
    SplitMix64 rng(17);
    for (int i = 0; i < 300; ++i) {
        VerifierLogits l{rng.uniform_real(-2, 2), rng.uniform_real(-2, 2),
                         rng.uniform_real(-2, 2)};
        bool was_b = false;
        for (double b = -0.8; b <= 1.6 + 1e-9; b += 0.05) {
            const bool is_b = verifier::decode(l, b).verdict == Verdict::NotSupported;
            if (was_b) CHECK(is_b);
            was_b = is_b;
        }
    }
}

TEST_CASE("is_hcns worked examples") {
    CHECK(verifier::is_hcns({0.1, 1.5, 0.0}, -0.34, 0.8));          // margin 1.06 > 0.8
    CHECK_FALSE(verifier::is_hcns({0.0, 0.9, 0.0}, -0.34, 0.8));    // decoded B, margin 0.56
    CHECK_FALSE(verifier::is_hcns({2.0, 1.0, 0.0}, -0.34, 0.8));    // decoded A
}

TEST_CASE("is_hcns is monotone non-increasing in delta") {
    SplitMix64 rng(23);
    for (int i = 0; i < 200; ++i) {
        VerifierLogits l{rng.uniform_real(-2, 2), rng.uniform_real(-2, 2),
                         rng.uniform_real(-2, 2)};
        bool prev = verifier::is_hcns(l, -0.34, 0.0);
        for (double delta = 0.2; delta <= 2.0; delta += 0.2) {
            const bool cur = verifier::is_hcns(l, -0.34, delta);
            if (cur) CHECK(prev);  // once false it stays false
            prev = cur;
        }
    }
}

TEST_CASE("raw-logit delta convention is exposed") {
    // margin under bias-adjusted: 1.5 - 0.34 - 0.1 = 1.06; raw: 1.5 - 0.1 = 1.4
    auto adj = verifier::decode({0.1, 1.5, 0.0}, -0.34, DeltaConvention::BiasAdjusted);
    auto raw = verifier::decode({0.1, 1.5, 0.0}, -0.34, DeltaConvention::RawLogit);
    CHECK(adj.margin == doctest::Approx(1.06));
    CHECK(raw.margin == doctest::Approx(1.4));
    CHECK(adj.verdict == raw.verdict);  // verdict always uses the adjusted logit
}

TEST_CASE("compute_metrics hand-worked confusion") {
    using P = std::pair<Verdict, Verdict>;
    std::vector<P> pairs{{Verdict::Supported, Verdict::Supported},
                         {Verdict::Supported, Verdict::NotSupported},
                         {Verdict::NotSupported, Verdict::NotSupported},
                         {Verdict::NotAddressed, Verdict::NotAddressed}};
    auto m = verifier::compute_metrics(pairs);
    CHECK(m.f1[0] == doctest::Approx(2.0 / 3.0));
    CHECK(m.f1[1] == doctest::Approx(2.0 / 3.0));
    CHECK(m.f1[2] == doctest::Approx(1.0));
    CHECK(m.macro_f1 == doctest::Approx(7.0 / 9.0));
    CHECK(m.accuracy == doctest::Approx(0.75));
    CHECK(m.recall_ns() == doctest::Approx(1.0));

    std::vector<P> perfect{{Verdict::Supported, Verdict::Supported},
                           {Verdict::NotSupported, Verdict::NotSupported}};
    auto mp = verifier::compute_metrics(perfect);
    CHECK(mp.accuracy == 1.0);
    // Unseen class C: zero true and predicted positives, 0-convention applies
    CHECK(mp.f1[2] == 0.0);

    std::vector<P> degenerate{{Verdict::Supported, Verdict::NotSupported},
                              {Verdict::NotSupported, Verdict::NotSupported},
                              {Verdict::NotAddressed, Verdict::NotSupported}};
    auto md = verifier::compute_metrics(degenerate);
    CHECK(md.recall[1] == 1.0);
    CHECK(md.recall[0] == 0.0);
    CHECK(md.recall[2] == 0.0);

    CHECK_THROWS_AS(verifier::compute_metrics({}), std::invalid_argument);
}

TEST_CASE("sweep_bias picks the smallest maximizer and lambda=0 is macro-F1") {
    // Separable fixture: bias 0 already perfect.
    std::vector<verifier::LabeledLogits> dev;
    dev.push_back({{3.0, 0.0, 0.0}, Verdict::Supported});
    dev.push_back({{0.0, 3.0, 0.0}, Verdict::NotSupported});
    dev.push_back({{0.0, 0.0, 3.0}, Verdict::NotAddressed});
    auto grid = verifier::make_grid(-0.8, 1.6, 0.05);
    auto r = verifier::sweep_bias(dev, grid, 0.10);
    // J is maximal (macro 1, recall 1) on a plateau; smallest such bias wins.
    CHECK(r.best_bias == doctest::Approx(-0.8));
    CHECK(r.curve.size() == grid.size());

    SplitMix64 rng(31);
    std::vector<verifier::LabeledLogits> random_dev;
    for (int i = 0; i < 120; ++i) {
        random_dev.push_back(
            {{rng.uniform_real(-2, 2), rng.uniform_real(-2, 2), rng.uniform_real(-2, 2)},
             static_cast<Verdict>(rng.uniform_int(0, 2))});
    }
    auto no_lambda = verifier::sweep_bias(random_dev, grid, 0.0);
    double best_macro = -1.0;
    double best_b = 0.0;
    for (const auto& pt : no_lambda.curve) {
        if (pt.macro_f1 > best_macro) {
            best_macro = pt.macro_f1;
            best_b = pt.bias;
        }
        CHECK(pt.j == doctest::Approx(pt.macro_f1));  // lambda = 0
    }
    CHECK(no_lambda.best_bias == doctest::Approx(best_b));
}

TEST_CASE("recall_ns along the sweep grid is non-decreasing") {
    SplitMix64 rng(37);
    std::vector<verifier::LabeledLogits> dev;
    for (int i = 0; i < 200; ++i) {
        dev.push_back(
            {{rng.uniform_real(-2, 2), rng.uniform_real(-2, 2), rng.uniform_real(-2, 2)},
             static_cast<Verdict>(rng.uniform_int(0, 2))});
    }
    auto r = verifier::sweep_bias(dev, verifier::make_grid(-0.8, 1.6, 0.05), 0.1);
    for (std::size_t i = 1; i < r.curve.size(); ++i) {
        CHECK(r.curve[i].recall_ns >= r.curve[i - 1].recall_ns);
    }
}

TEST_CASE("classification_loss worked values") {
    verifier::VerifierLossConfig cfg;
    CHECK(verifier::classification_loss({0, 0, 0}, Verdict::Supported, cfg) ==
          doctest::Approx(std::log(3.0)).epsilon(1e-12));

    verifier::VerifierLossConfig weighted = cfg;
    weighted.class_weights = {2.0, 1.0, 1.0};
    CHECK(verifier::classification_loss({0, 0, 0}, Verdict::Supported, weighted) ==
          doctest::Approx(2.0 * std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("focal modulation down-weights easy instances") {
    // p_y ~ 0.9: gamma 2 must shrink the loss versus gamma 0.
    VerifierLogits l{4.0, 1.0, 0.0};  // softmax puts ~0.94 on A
    verifier::VerifierLossConfig plain;
    verifier::VerifierLossConfig focal = plain;
    focal.focal_gamma = 2.0;
    CHECK(verifier::classification_loss(l, Verdict::Supported, focal) <
          verifier::classification_loss(l, Verdict::Supported, plain));
}

TEST_CASE("label smoothing keeps loss non-negative, cross-entropy recovered at zero") {
    SplitMix64 rng(41);
    for (int i = 0; i < 100; ++i) {
        VerifierLogits l{rng.uniform_real(-3, 3), rng.uniform_real(-3, 3),
                         rng.uniform_real(-3, 3)};
        auto truth = static_cast<Verdict>(rng.uniform_int(0, 2));
        verifier::VerifierLossConfig cfg;
        cfg.label_smoothing = rng.u01() * 0.9;
        CHECK(verifier::classification_loss(l, truth, cfg) >= 0.0);
    }
}

TEST_CASE("classification_loss reduces to plain cross-entropy at defaults") {
    SplitMix64 rng(47);
    verifier::VerifierLossConfig plain;  // eps 0, gamma 0, weights 1
    for (int i = 0; i < 100; ++i) {
        VerifierLogits l{rng.uniform_real(-3, 3), rng.uniform_real(-3, 3),
                         rng.uniform_real(-3, 3)};
        auto truth = static_cast<Verdict>(rng.uniform_int(0, 2));
        // independent route: -log softmax at the true class
        const double z[3] = {l.l_a, l.l_b, l.l_c};
        const double zmax = std::max({z[0], z[1], z[2]});
        double sum = 0.0;
        for (double v : z) sum += std::exp(v - zmax);
        const double ce = -(z[static_cast<int>(truth)] - zmax - std::log(sum));
        CHECK(verifier::classification_loss(l, truth, plain) ==
              doctest::Approx(ce).epsilon(1e-12));
    }
}

TEST_CASE("lexical oracle separates overlap, contradiction and no-evidence cases") {
    verifier::LexicalOracle oracle;
    std::vector<std::string> evidence{"started vancomycin for pneumonia on day 3",
                                      "creatinine 1.2 stable this morning"};
    auto supported = oracle.score("started vancomycin for pneumonia on day 3", evidence);
    CHECK(verifier::decode(supported, 0.0).verdict == Verdict::Supported);

    auto contradicted = oracle.score("never started vancomycin for pneumonia on day 3", evidence);
    CHECK(verifier::decode(contradicted, 0.0).verdict == Verdict::NotSupported);

    auto unrelated = oracle.score("underwent dialysis for renal failure yesterday", evidence);
    CHECK(verifier::decode(unrelated, 0.0).verdict == Verdict::NotAddressed);

    auto no_evidence = oracle.score("any claim at all", {});
    CHECK(verifier::decode(no_evidence, 0.0).verdict == Verdict::NotAddressed);
}

TEST_CASE("class weights from counts") {
    auto equal = verifier::class_weights_from_counts({5, 5, 5}, 0.7);
    CHECK(equal[0] == doctest::Approx(1.0));
    CHECK(equal[1] == doctest::Approx(1.0));
    CHECK(equal[2] == doctest::Approx(1.0));

    auto off = verifier::class_weights_from_counts({8, 1, 1}, 0.0);
    CHECK(off[0] == doctest::Approx(1.0));

    auto skew = verifier::class_weights_from_counts({8, 1, 1}, 1.0);
    CHECK(skew[0] == doctest::Approx(0.17647).epsilon(1e-4));
    CHECK(skew[1] == doctest::Approx(1.41176).epsilon(1e-4));
    CHECK(skew[2] == doctest::Approx(1.41176).epsilon(1e-4));
    CHECK((skew[0] + skew[1] + skew[2]) / 3.0 == doctest::Approx(1.0));

    CHECK_THROWS_AS(verifier::class_weights_from_counts({0, 1, 1}, 1.0), std::invalid_argument);
}

TEST_CASE("toy verifier trains to high accuracy on a separable set") {
    // Class-determined marker tokens make the set linearly separable.
    std::vector<verifier::VerifierInstance> instances;
    SplitMix64 rng(51);
    const char* fillers[] = {"patient", "course", "review", "stable", "plan"};
    for (int i = 0; i < 120; ++i) {
        auto truth = static_cast<Verdict>(i % 3);
        const char* marker = truth == Verdict::Supported ? "confirmed"
                             : truth == Verdict::NotSupported ? "contradicted" : "unmentioned";
        std::string claim = std::string(fillers[rng.uniform_int(0, 4)]) + " " + marker + " " +
                            fillers[rng.uniform_int(0, 4)] + std::to_string(i);
        instances.push_back({claim, {"evidence line"}, truth});
    }
    verifier::VerifierLossConfig loss;
    verifier::ToyTrainConfig train;
    train.feature_dim = 512;
    train.steps = 500;
    train.learning_rate = 1.0;
    auto model = verifier::train_toy_verifier(instances, loss, train);

    int correct = 0;
    for (const auto& inst : instances) {
        auto d = verifier::decode(model.score(inst.claim, inst.evidence), 0.0);
        if (d.verdict == inst.truth) ++correct;
    }
    CHECK(static_cast<double>(correct) / instances.size() >= 0.95);
}

TEST_CASE("toy verifier rejects single-class input") {
    std::vector<verifier::VerifierInstance> instances{
        {"one claim", {}, Verdict::Supported}, {"two claim", {}, Verdict::Supported}};
    CHECK_THROWS_AS(
        verifier::train_toy_verifier(instances, {}, {}),
        std::invalid_argument);
}

TEST_CASE("analytic gradient matches central finite differences on 30 parameters") {
    const int dim = 10;  // 3 classes x 10 features = 30 parameters
    SplitMix64 rng(61);
    verifier::VerifierLossConfig cfg;
    cfg.class_weights = {1.3, 0.8, 0.9};
    cfg.label_smoothing = 0.12;
    cfg.focal_gamma = 1.7;

    for (int trial = 0; trial < 25; ++trial) {
        std::vector<double> w(3 * dim), f(dim);
        for (auto& x : w) x = rng.uniform_real(-1, 1);
        for (auto& x : f) x = rng.uniform_real(-1, 1);
        auto truth = static_cast<Verdict>(rng.uniform_int(0, 2));

        std::vector<double> grad(3 * dim, 0.0);
        verifier::loss_and_grad(w, dim, f, truth, cfg, grad);

        const double h = 1e-5;
        double diff_sq = 0.0, fd_sq = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            auto wp = w, wm = w;
            wp[j] += h;
            wm[j] -= h;
            std::vector<double> dummy(3 * dim, 0.0);
            const double lp = verifier::loss_and_grad(wp, dim, f, truth, cfg, dummy);
            std::fill(dummy.begin(), dummy.end(), 0.0);
            const double lm = verifier::loss_and_grad(wm, dim, f, truth, cfg, dummy);
            const double fd = (lp - lm) / (2 * h);
            diff_sq += (fd - grad[j]) * (fd - grad[j]);
            fd_sq += fd * fd;
        }
        CHECK(std::sqrt(diff_sq) / std::max(std::sqrt(fd_sq), 1e-12) < 1e-6);
    }
}
