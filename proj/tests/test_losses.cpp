#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "support/gradcheck.hpp"
#include "vts/losses.hpp"

using namespace vts;
using namespace vts::losses;
using nn::Tensor;

namespace {

Tensor random_signal(int n, std::uint64_t seed, double amp = 0.4) {
    Rng rng(seed);
    Tensor t = Tensor::zeros({n});
    for (auto& v : t.val()) v = rng.uniform(-amp, amp);
    return t;
}

// Central differences on a random subset of coordinates of x_hat.
double fd_subset(Tensor x_hat, const std::function<Tensor()>& f, int count,
                 std::uint64_t seed, double eps = 1e-5) {
    x_hat.set_requires_grad(true);
    Tensor loss = f();
    x_hat.zero_grad();
    loss.backward();
    std::vector<double> analytic = x_hat.grad();

    Rng rng(seed);
    double worst = 0;
    for (int c = 0; c < count; ++c) {
        long i = static_cast<long>(rng.below(x_hat.size()));
        double orig = x_hat.val()[i];
        x_hat.val()[i] = orig + eps;
        double up = f().item();
        x_hat.val()[i] = orig - eps;
        double dn = f().item();
        x_hat.val()[i] = orig;
        double numeric = (up - dn) / (2 * eps);
        double denom =
            std::max({1e-4, std::fabs(analytic[i]), std::fabs(numeric)});
        worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
    }
    return worst;
}

}  // namespace

TEST_CASE("lsgan generator loss") {
    auto ones = Tensor::full({5}, 1.0);
    auto zeros = Tensor::zeros({5});
    CHECK(lsgan_generator_loss({ones, ones, ones}).item() ==
          doctest::Approx(0.0));
    CHECK(lsgan_generator_loss({zeros, zeros, zeros}).item() ==
          doctest::Approx(3.0));
    auto s = Tensor::from({2}, {0.5, 1.5});
    CHECK(lsgan_generator_loss({s}).item() == doctest::Approx(0.25));
    CHECK_THROWS_AS(lsgan_generator_loss({}), InvalidArgument);
}

TEST_CASE("lsgan discriminator loss") {
    auto ones = Tensor::full({4}, 1.0);
    auto zeros = Tensor::zeros({4});
    auto halves = Tensor::full({4}, 0.5);
    CHECK(lsgan_discriminator_loss({ones, ones, ones}, {zeros, zeros, zeros})
              .item() == doctest::Approx(0.0));
    CHECK(lsgan_discriminator_loss({zeros, zeros, zeros}, {ones, ones, ones})
              .item() == doctest::Approx(6.0));
    CHECK(lsgan_discriminator_loss({halves}, {halves}).item() ==
          doctest::Approx(0.5));
    CHECK_THROWS_AS(lsgan_discriminator_loss({ones}, {ones, ones}),
                    InvalidArgument);
}

TEST_CASE("spectral convergence anchors") {
    dsp::StftParams p{512, 50, 240, true};
    auto x = random_signal(2400, 11);
    auto x2 = nn::scale(x, 2.0);
    auto zero = Tensor::zeros({2400});
    CHECK(spectral_convergence(x, x, p).item() == doctest::Approx(0.0));
    CHECK(spectral_convergence(x, x2, p).item() ==
          doctest::Approx(1.0).epsilon(1e-6));
    CHECK(spectral_convergence(x, zero, p).item() ==
          doctest::Approx(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(spectral_convergence(zero, x, p), InvalidArgument);
}

TEST_CASE("log stft magnitude anchors") {
    dsp::StftParams p{512, 50, 240, true};
    auto x = random_signal(2400, 12);
    auto x2 = nn::scale(x, 2.0);
    CHECK(log_stft_magnitude_loss(x, x, p).item() == doctest::Approx(0.0));
    CHECK(log_stft_magnitude_loss(x, x2, p).item() ==
          doctest::Approx(std::log(2.0)).epsilon(1e-4));
    auto zero = Tensor::zeros({2400});
    CHECK(log_stft_magnitude_loss(zero, zero, p).item() ==
          doctest::Approx(0.0));
}

TEST_CASE("multi-resolution stft loss") {
    auto set = default_resolutions();
    REQUIRE(set.resolutions.size() == 3);
    auto x = random_signal(4800, 13);
    CHECK(multi_resolution_stft_loss(x, x, set).item() ==
          doctest::Approx(0.0));
    auto x2 = nn::scale(x, 2.0);
    CHECK(multi_resolution_stft_loss(x, x2, set).item() ==
          doctest::Approx(1.0 + std::log(2.0)).epsilon(1e-3));

    // mean over resolutions
    double acc = 0;
    for (const auto& p : set.resolutions)
        acc += single_stft_loss(x, x2, p).item();
    CHECK(multi_resolution_stft_loss(x, x2, set).item() ==
          doctest::Approx(acc / 3.0));

    StftResolutionSet one;
    one.resolutions = {set.resolutions[0]};
    CHECK(multi_resolution_stft_loss(x, x2, one).item() ==
          doctest::Approx(single_stft_loss(x, x2, set.resolutions[0]).item()));
    CHECK_THROWS_AS(multi_resolution_stft_loss(x, x, StftResolutionSet{}),
                    InvalidArgument);
}

TEST_CASE("mfcc loss anchors and symmetry") {
    auto x = random_signal(2400, 14);
    auto y = random_signal(2400, 15);
    CHECK(mfcc_loss(x, x).item() == doctest::Approx(0.0));
    auto z = Tensor::zeros({2400});
    CHECK(mfcc_loss(z, z).item() == doctest::Approx(0.0));
    CHECK(mfcc_loss(x, y).item() == doctest::Approx(mfcc_loss(y, x).item()));

    // differentiable path agrees with the dsp pipeline
    AudioClip c;
    c.sample_rate = 24000;
    c.samples.assign(x.val().begin(), x.val().end());
    AudioClip d;
    d.sample_rate = 24000;
    d.samples.assign(y.val().begin(), y.val().end());
    auto ma = dsp::mfcc(c), mb = dsp::mfcc(d);
    double ref = 0;
    for (std::size_t i = 0; i < ma.values.size(); ++i)
        ref += std::fabs(ma.values[i] - mb.values[i]);
    ref /= ma.values.size();
    CHECK(mfcc_loss(x, y).item() == doctest::Approx(ref).epsilon(1e-6));
}

TEST_CASE("generator total combination") {
    auto adv = Tensor::scalar(0.5);
    auto mr = Tensor::scalar(0.1);
    auto mf = Tensor::scalar(0.2);
    CHECK(wavegan_generator_total(adv, mr, mf, default_weights()).item() ==
          doctest::Approx(11.5));
    auto one = Tensor::scalar(1.0);
    CHECK(wavegan_generator_total(one, one, one, perceptual_weights()).item() ==
          doctest::Approx(3.6));
    CHECK(wavegan_generator_total(one, one, one, {0, 0, 0}).item() ==
          doctest::Approx(0.0));
}

TEST_CASE("mel l1 loss") {
    auto a = Tensor::full({4, 80}, -1.0);
    auto b = Tensor::full({4, 80}, 1.0);
    CHECK(mel_l1_loss(a, a).item() == doctest::Approx(0.0));
    CHECK(mel_l1_loss(a, b).item() == doctest::Approx(2.0));
    auto c = Tensor::zeros({2, 5});
    auto d = Tensor::zeros({2, 5});
    d.val()[3] = 0.7;
    CHECK(mel_l1_loss(c, d).item() == doctest::Approx(0.07));
    CHECK_THROWS_AS(mel_l1_loss(a, c), InvalidArgument);
}

TEST_CASE("loss gradients match finite differences") {
    int n = 2400;  // 0.1 s
    auto x = random_signal(n, 21);
    auto xh = random_signal(n, 22);
    dsp::StftParams p{512, 50, 240, true};

    CHECK(fd_subset(xh, [&] { return spectral_convergence(x, xh, p); }, 20,
                    101) < 1e-3);
    CHECK(fd_subset(xh, [&] { return log_stft_magnitude_loss(x, xh, p); }, 20,
                    102) < 1e-3);
    StftResolutionSet small;
    small.resolutions = {{512, 50, 240, true}, {256, 30, 120, true}};
    CHECK(fd_subset(xh, [&] { return multi_resolution_stft_loss(x, xh, small); },
                    15, 103) < 1e-3);
    CHECK(fd_subset(xh, [&] { return mfcc_loss(x, xh); }, 15, 104) < 1e-3);

    Rng r5(5), r6(6);
    auto ma = testing::random_tensor({6, 10}, r5);
    auto mb = testing::random_tensor({6, 10}, r6);
    mb.set_requires_grad(true);
    CHECK(testing::grad_check({mb}, [&] { return mel_l1_loss(ma, mb); }) <
          1e-4);

    auto s1 = random_signal(12, 31), s2 = random_signal(12, 32);
    s1.set_requires_grad(true);
    s2.set_requires_grad(true);
    CHECK(testing::grad_check({s1}, [&] {
              return lsgan_generator_loss({s1, nn::scale(s1, 0.5)});
          }) < 1e-5);
    CHECK(testing::grad_check({s1, s2}, [&] {
              return lsgan_discriminator_loss({s1}, {s2});
          }) < 1e-5);
}
