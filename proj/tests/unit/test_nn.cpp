#include <doctest.h>

#include <cmath>
#include <numeric>

#include "pktcam/error.hpp"
#include "pktcam/nn/adam.hpp"
#include "pktcam/nn/dataset.hpp"
#include "pktcam/nn/metrics.hpp"
#include "pktcam/nn/model.hpp"
#include "pktcam/nn/model_io.hpp"
#include "pktcam/nn/train.hpp"
#include "reference.hpp"

using namespace pktcam;
using namespace pktcam::nn;

TEST_CASE("conv forward matches the loop reference") {
    Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const auto m = ref::random_small_model<double>(rng, 6, 40);
        const auto x = ref::random_inputs<double>(rng, m.config, 1);
        const auto fwd = forward<double>(m, x);
        const auto r = ref::forward<double>(m, x);
        for (int c = 0; c < m.config.num_classes; ++c) CHECK(fwd.logits(c) == doctest::Approx(r.logits[c]).epsilon(1e-12));
        for (std::size_t k = 0; k < r.last.size(); ++k) {
            for (std::size_t p = 0; p < r.last[k].size(); ++p) {
                CHECK(fwd.last_feature_maps(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p)) ==
                      doctest::Approx(r.last[k][p]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("same padding keeps the length") {
    const auto m = init_model<float>(ModelConfig::model1(7, 3), {}, 1);
    std::vector<float> x(kVectorLen, 0.5f);
    const auto fwd = forward<float>(m, x);
    CHECK(fwd.last_feature_maps.rows() == 128);
    CHECK(fwd.last_feature_maps.cols() == 1500);
    CHECK(fwd.probabilities.size() == 3);
    CHECK(std::accumulate(fwd.probabilities.begin(), fwd.probabilities.end(), 0.0) == doctest::Approx(1.0));
}

TEST_CASE("shape errors") {
    ModelConfig even;
    even.channel_widths = {4};
    even.kernel_size = 4;
    CHECK_THROWS_AS(even.validate(), ShapeError);
    CHECK_THROWS_AS(ModelConfig::named("model3", 3, 2), ShapeError);
    const auto m = init_model<float>(ModelConfig::model1(3, 2), {}, 1);
    std::vector<float> short_input(10);
    CHECK_THROWS_AS(forward<float>(m, short_input), ShapeError);
    std::vector<float> x(kVectorLen);
    std::vector<int> bad = {2};
    CHECK_THROWS_AS(loss_and_gradients<float>(m, x, bad), DataError);
}

TEST_CASE("initialisation is seeded and bounded") {
    const auto cfg = ModelConfig::model2(5, 4);
    const auto a = init_model<float>(cfg, {}, 42);
    const auto b = init_model<float>(cfg, {}, 42);
    const auto c = init_model<float>(cfg, {}, 43);
    CHECK(a.params.conv[3].weights == b.params.conv[3].weights);
    CHECK(a.params.conv[3].weights != c.params.conv[3].weights);
    CHECK(a.params.conv.size() == 8);
    const double limit = std::sqrt(6.0 / (64 * 5));
    CHECK(a.params.conv[4].weights.cwiseAbs().maxCoeff() <= limit);
    CHECK(a.params.conv[4].bias.isZero());
    CHECK(a.params.dense.bias.isZero());
}

TEST_CASE("analytic gradients match finite differences") {
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = ref::random_small_model<double>(rng);
        const std::size_t batch = 1 + rng.uniform_index(3);
        const auto x = ref::random_inputs<double>(rng, m.config, batch);
        std::vector<int> y(batch);
        for (int& v : y) v = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(m.config.num_classes)));
        const auto lg = loss_and_gradients<double>(m, x, y);
        CHECK(lg.loss == doctest::Approx(ref::loss<double>(m, x, y)).epsilon(1e-12));
        const auto gc = ref::check_gradients(m, x, y, lg.grads, 1e-5);
        CHECK(gc.checked > 0);
        CHECK(gc.max_rel_error < 1e-4);
    }
}

TEST_CASE("frozen dense bias receives no gradient") {
    Rng rng(6);
    auto m = ref::random_small_model<double>(rng);
    m.config.dense_bias = false;
    m.params.dense.bias.setZero();
    const auto x = ref::random_inputs<double>(rng, m.config, 2);
    const std::vector<int> y = {0, 1};
    const auto lg = loss_and_gradients<double>(m, x, y);
    CHECK(lg.grads.dense.bias.isZero());
    AdamState state;
    adam_step(m, lg.grads, state, AdamConfig{});
    CHECK(m.params.dense.bias.isZero());
}

TEST_CASE("batch gradient does not depend on chunking") {
    Rng rng(7);
    const auto m = ref::random_small_model<double>(rng);
    const std::size_t batch = 21;
    const auto x = ref::random_inputs<double>(rng, m.config, batch);
    std::vector<int> y(batch);
    for (int& v : y) v = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(m.config.num_classes)));
    const auto all = loss_and_gradients<double>(m, x, y);
    // Mean of per-sample gradients.
    auto sum = m.params.zeros_like();
    const std::size_t len = x.size() / batch;
    for (std::size_t i = 0; i < batch; ++i) {
        const auto one = loss_and_gradients<double>(m, std::span(x).subspan(i * len, len), std::span(y).subspan(i, 1));
        sum += one.grads;
    }
    const auto a = all.grads.views();
    const auto b = sum.views();
    for (std::size_t t = 0; t < a.size(); ++t) {
        for (std::size_t i = 0; i < a[t].size(); ++i) CHECK(a[t][i] == doctest::Approx(b[t][i] / batch).epsilon(1e-10));
    }
    const auto again = loss_and_gradients<double>(m, x, y);
    CHECK(again.grads.dense.weights == all.grads.dense.weights);
}

TEST_CASE("Adam matches a hand-rolled scalar trace") {
    // f(p) = (p - 3)^2, gradient 2 (p - 3).
    const AdamConfig cfg;
    std::vector<double> p = {0.0};
    AdamMoments mom;
    double x = 0.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 50; ++t) {
        const double g = 2 * (x - 3);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1 - std::pow(0.9, t));
        const double vh = v / (1 - std::pow(0.999, t));
        x -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);

        std::vector<double> grad = {2 * (p[0] - 3)};
        adam_update<double>(p, grad, mom, t, cfg);
        CHECK(p[0] == doctest::Approx(x).epsilon(1e-15));
    }
    // First step moves by the learning rate regardless of gradient scale.
    std::vector<double> q = {1.0};
    AdamMoments fresh;
    std::vector<double> big = {12345.0};
    adam_update<double>(q, big, fresh, 1, cfg);
    CHECK(q[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-9));
}

namespace {

// Brute force straight from the label lists.

} // namespace

TEST_CASE("metrics agree with brute force") {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 2 + static_cast<int>(rng.uniform_index(5));
        const std::size_t n = rng.uniform_index(60);
        std::vector<int> t(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(k)));
            p[i] = rng.uniform_index(3) ? t[i] : static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(k)));
        }
        const auto got = report_from_predictions(t, p, k);
        const auto want = ref::brute_force_metrics(t, p, k);
        CHECK(got.total == n);
        CHECK(got.accuracy == doctest::Approx(want.accuracy));
        for (int c = 0; c < k; ++c) {
            CHECK(got.per_class[c].precision == doctest::Approx(want.per_class[c].precision));
            CHECK(got.per_class[c].recall == doctest::Approx(want.per_class[c].recall));
            CHECK(got.per_class[c].f1 == doctest::Approx(want.per_class[c].f1));
            CHECK(got.per_class[c].support == want.per_class[c].support);
        }
        CHECK(got.macro.f1 == doctest::Approx(want.macro.f1));
        CHECK(got.weighted.f1 == doctest::Approx(want.weighted.f1));
        CHECK(got.weighted.precision == doctest::Approx(want.weighted.precision));
    }
}

TEST_CASE("F1 edge cases") {
    CHECK(f1_score(0.0, 0.0) == 0.0);
    CHECK(f1_score(1.0, 0.0) == 0.0);
    CHECK(f1_score(0.5, 0.5) == doctest::Approx(0.5));
    // Class 2 never appears and is never predicted.
    const auto r = report_from_predictions(std::vector<int>{0, 1, 1}, std::vector<int>{0, 1, 0}, 3);
    CHECK(r.per_class[2].precision == 0.0);
    CHECK(r.per_class[2].f1 == 0.0);
    CHECK(r.confusion[1][0] == 1);
    CHECK_THROWS_AS(report_from_predictions(std::vector<int>{0}, std::vector<int>{3}, 3), DataError);
}

namespace {

Dataset toy_dataset(std::size_t per_class, int classes, std::size_t len, std::uint64_t seed) {
    Rng rng(seed);
    Dataset d;
    d.sample_len = len;
    for (int c = 0; c < classes; ++c) d.class_names.push_back("c" + std::to_string(c));
    for (std::size_t i = 0; i < per_class * static_cast<std::size_t>(classes); ++i) {
        const int c = static_cast<int>(i % static_cast<std::size_t>(classes));
        std::vector<float> x(len);
        for (auto& v : x) v = static_cast<float>(rng.uniform01()) * 0.2f;
        // Distinct 3-byte patterns; global pooling cannot see position alone.
        const float pattern[3][3] = {{1, 0, 1}, {1, 1, 0}, {0, 1, 1}};
        for (std::size_t k = 0; k < 3; ++k) x[2 + k] = pattern[c % 3][k];
        d.add(x, c);
    }
    return d;
}

} // namespace

TEST_CASE("stratified split and undersampling") {
    const Dataset d = toy_dataset(10, 3, 8, 1);
    const Split s = stratified_split(d, 0.8, 3);
    CHECK(s.train.size() + s.test.size() == d.size());
    CHECK(s.train.class_counts() == std::vector<std::size_t>{8, 8, 8});
    CHECK(s.test.class_counts() == std::vector<std::size_t>{2, 2, 2});
    const Split again = stratified_split(d, 0.8, 3);
    CHECK(again.test.inputs == s.test.inputs);

    const Dataset u = undersample(d, 4, 9);
    CHECK(u.class_counts() == std::vector<std::size_t>{4, 4, 4});

    Dataset tiny;
    tiny.class_names = {"a", "b"};
    tiny.sample_len = 2;
    tiny.add(std::vector<float>{0, 0}, 0);
    tiny.add(std::vector<float>{0, 0}, 1);
    tiny.add(std::vector<float>{0, 0}, 1);
    CHECK_THROWS_AS(stratified_split(tiny, 0.8, 1), DataError);
}

TEST_CASE("training learns planted patterns") {
    const Dataset d = toy_dataset(40, 3, 24, 2);
    ModelConfig cfg;
    cfg.channel_widths = {16, 16};
    cfg.kernel_size = 3;
    cfg.num_classes = 3;
    cfg.input_len = 24;
    auto m = init_model<float>(cfg, d.class_names, 1);
    TrainConfig tc;
    tc.epochs = 60;
    tc.batch_size = 16;
    tc.adam.learning_rate = 1e-2;
    int calls = 0;
    const auto r = train(m, d, tc, [&](const EpochResult&) { ++calls; });
    CHECK(calls == 60);
    CHECK(r.history.back().eval.weighted.f1 > 0.9);
    CHECK(r.history.back().train_loss < r.history.front().train_loss);

    const auto r2 = train(m, d, tc);
    CHECK(r2.model.params.dense.weights == r.model.params.dense.weights);

    tc.epochs = 0;
    const auto r0 = train(m, d, tc);
    REQUIRE(r0.history.size() == 1);
    CHECK(r0.history[0].epoch == 0);
}

TEST_CASE("model file round trip and corruption") {
    auto m = init_model<float>(ModelConfig::model1(5, 3), {"a", "b", "c"}, 9);
    m.params.dense.bias(1) = 0.25f;
    const Bytes bytes = serialize_model(m);
    const auto back = deserialize_model(bytes);
    CHECK(back.config == m.config);
    CHECK(back.class_names == m.class_names);
    for (std::size_t l = 0; l < m.params.conv.size(); ++l) {
        CHECK(back.params.conv[l].weights == m.params.conv[l].weights);
        CHECK(back.params.conv[l].bias == m.params.conv[l].bias);
    }
    CHECK(back.params.dense.bias == m.params.dense.bias);

    auto expect_kind = [](const Bytes& b, ModelFormatErrorKind kind) {
        try {
            deserialize_model(b);
            FAIL("expected ModelFormatError");
        } catch (const ModelFormatError& e) {
            CHECK(e.kind() == kind);
        }
    };
    Bytes flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x01;
    expect_kind(flipped, ModelFormatErrorKind::ChecksumMismatch);
    Bytes version = bytes;
    version[8] = 2;
    expect_kind(version, ModelFormatErrorKind::VersionMismatch);
    Bytes magic = bytes;
    magic[0] = 'X';
    expect_kind(magic, ModelFormatErrorKind::BadMagic);
    expect_kind(Bytes(bytes.begin(), bytes.begin() + 30), ModelFormatErrorKind::ChecksumMismatch);

    const auto path = std::filesystem::temp_directory_path() / "pktcam_model_test.pcm";
    save_model(m, path);
    CHECK(load_model(path).params.dense.weights == m.params.dense.weights);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_model(path), ModelFormatError);
}

TEST_CASE("worked convolution examples") {
    Tensor<double> x(1, 5);
    x << 0, 1, 2, 3, 4;
    ConvLayer<double> ones{Tensor<double>::Ones(1, 3), Vec<double>::Zero(1), 3};
    const auto y = conv1d_forward(x, ones);
    const std::vector<double> expect = {1, 3, 6, 9, 7};
    for (int i = 0; i < 5; ++i) CHECK(y(0, i) == expect[static_cast<std::size_t>(i)]);

    ConvLayer<double> identity{Tensor<double>::Zero(1, 3), Vec<double>::Zero(1), 3};
    identity.w(0, 0, 1) = 1.0;
    const auto z = conv1d_forward(x, identity);
    for (int i = 0; i < 5; ++i) CHECK(z(0, i) == x(0, i));

    ConvLayer<double> biased = identity;
    biased.bias(0) = -2.0;
    const auto r = relu(conv1d_forward(x, biased));
    const std::vector<double> clipped = {0, 0, 0, 1, 2};
    for (int i = 0; i < 5; ++i) CHECK(r(0, i) == clipped[static_cast<std::size_t>(i)]);
}

TEST_CASE("global average pooling") {
    Tensor<double> maps(2, 3);
    maps << 1, 2, 3, 0, 0, 6;
    const auto g = gap(maps);
    CHECK(g(0) == 2.0);
    CHECK(g(1) == 2.0);
}

TEST_CASE("uniform prediction costs ln C") {
    for (int classes : {2, 4, 7}) {
        ModelConfig cfg;
        cfg.channel_widths = {3};
        cfg.kernel_size = 3;
        cfg.num_classes = classes;
        cfg.input_len = 16;
        auto m = init_model<double>(cfg, {}, 1);
        for (auto v : m.params.views()) std::fill(v.begin(), v.end(), 0.0);
        std::vector<double> x(16 * 3, 0.3);
        const std::vector<int> labels = {0, classes - 1, 1};
        const auto lg = loss_and_gradients<double>(m, x, labels);
        CHECK(lg.loss == doctest::Approx(std::log(static_cast<double>(classes))).epsilon(1e-12));
        const auto p = forward<double>(m, std::span<const double>(x).first(16)).probabilities;
        for (double v : p) CHECK(v == doctest::Approx(1.0 / classes));
    }
}

TEST_CASE("one Adam step on theta squared") {
    std::vector<double> theta = {1.0};
    const std::vector<double> grad = {2.0 * theta[0]};
    AdamMoments moments;
    AdamConfig cfg;
    cfg.learning_rate = 0.1;
    adam_update<double>(theta, grad, moments, 1, cfg);
    CHECK(theta[0] == doctest::Approx(0.9).epsilon(1e-7));
}
