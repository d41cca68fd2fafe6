#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <doctest.h>

#include "tdalign/series.hpp"
#include "test_util.hpp"

using namespace tdalign;
using test_util::TempDir;
using test_util::write_file;

TEST_SUITE("series") {

TEST_CASE("load_csv drops a leading date column automatically") {
    TempDir tmp("series");
    write_file(tmp.str("a.csv"), "date,a,b\n2020-01-01,1.5,2\n2020-01-02,-3,4e-1\n");
    const SeriesMatrix s = load_csv(tmp.str("a.csv"));
    CHECK(s.rows() == 2);
    CHECK(s.cols() == 2);
    CHECK(s.names == std::vector<std::string>{"a", "b"});
    CHECK(s.at(0, 0) == 1.5);
    CHECK(s.at(0, 1) == 2.0);
    CHECK(s.at(1, 0) == -3.0);
    CHECK(s.at(1, 1) == 0.4);
}

TEST_CASE("load_csv honors an explicit date column anywhere in the header") {
    TempDir tmp("series");
    write_file(tmp.str("a.csv"), "a,ts,b\n1,x,2\n3,y,4\n");
    const SeriesMatrix s = load_csv(tmp.str("a.csv"), std::string("ts"));
    CHECK(s.cols() == 2);
    CHECK(s.names == std::vector<std::string>{"a", "b"});
    CHECK(s.at(1, 1) == 4.0);

    CHECK_THROWS_AS((void)load_csv(tmp.str("a.csv"), std::string("nope")), std::invalid_argument);
}

TEST_CASE("load_csv keeps a first column that is not named date") {
    TempDir tmp("series");
    write_file(tmp.str("a.csv"), "x,y\n1,2\n3,4\n");
    const SeriesMatrix s = load_csv(tmp.str("a.csv"));
    CHECK(s.cols() == 2);
    CHECK(s.at(0, 0) == 1.0);
}

TEST_CASE("load_csv handles CRLF endings and trailing blank lines") {
    TempDir tmp("series");
    write_file(tmp.str("a.csv"), "a,b\r\n1,2\r\n3,4\r\n\r\n\r\n");
    const SeriesMatrix s = load_csv(tmp.str("a.csv"));
    CHECK(s.rows() == 2);
    CHECK(s.at(1, 0) == 3.0);
}

TEST_CASE("load_csv rejects malformed inputs") {
    TempDir tmp("series");
    CHECK_THROWS_AS((void)load_csv(tmp.str("missing.csv")), std::invalid_argument);

    write_file(tmp.str("ragged.csv"), "a,b\n1,2\n3\n");
    CHECK_THROWS_AS((void)load_csv(tmp.str("ragged.csv")), std::invalid_argument);

    write_file(tmp.str("text.csv"), "a,b\n1,huh\n");
    CHECK_THROWS_AS((void)load_csv(tmp.str("text.csv")), std::invalid_argument);

    write_file(tmp.str("inf.csv"), "a,b\n1,inf\n");
    CHECK_THROWS_AS((void)load_csv(tmp.str("inf.csv")), std::invalid_argument);

    write_file(tmp.str("empty.csv"), "a,b\n");
    CHECK_THROWS_AS((void)load_csv(tmp.str("empty.csv")), std::invalid_argument);

    write_file(tmp.str("dateonly.csv"), "date\n2020-01-01\n");
    CHECK_THROWS_AS((void)load_csv(tmp.str("dateonly.csv")), std::invalid_argument);
}

TEST_CASE("csv write and load round trips doubles exactly") {
    TempDir tmp("series");
    SeriesMatrix s;
    s.names = {"u", "w"};
    s.values = Matrix(3, 2);
    s.values.data = {0.1, -2.5e-17, 3.0, 1.0 / 3.0, -123456.789, 5e300};

    write_csv(s, tmp.str("rt.csv"));
    const SeriesMatrix back = load_csv(tmp.str("rt.csv"));
    REQUIRE(back.rows() == 3);
    REQUIRE(back.cols() == 2);
    CHECK(back.names == s.names);
    for (std::size_t i = 0; i < s.values.data.size(); ++i) {
        CHECK(back.values.data[i] == s.values.data[i]);
    }
}

namespace {

SeriesMatrix ramp(int T, int N = 1) {
    SeriesMatrix s;
    s.values = Matrix(T, N);
    for (int t = 0; t < T; ++t) {
        for (int j = 0; j < N; ++j) {
            s.values.at(t, j) = t + 10.0 * j;
        }
    }
    for (int j = 0; j < N; ++j) {
        s.names.push_back("c" + std::to_string(j));
    }
    return s;
}

} // namespace

TEST_CASE("chronological split floors ratios and gives the remainder to the last split") {
    const SeriesMatrix s = ramp(10);
    const SplitResult r = chronological_split(s, SplitSpec{0.6, 0.2, 0.2}, 2);
    CHECK(r.train_targets == 6);
    CHECK(r.val_targets == 2);
    CHECK(r.test_targets == 2);
    CHECK(r.train.rows() == 6);
    CHECK(r.val.rows() == 4);  // 2 context + 2 target rows
    CHECK(r.test.rows() == 4);
    CHECK(r.val.at(0, 0) == 4.0);
    CHECK(r.val.at(2, 0) == 6.0);
    CHECK(r.test.at(0, 0) == 6.0);
    CHECK(r.test.at(3, 0) == 9.0);

    const SplitResult odd = chronological_split(ramp(7), SplitSpec{0.6, 0.2, 0.2}, 1);
    CHECK(odd.train_targets == 4);
    CHECK(odd.val_targets == 1);
    CHECK(odd.test_targets == 2);
}

TEST_CASE("chronological split of thirds tiles the rows exactly") {
    const double third = 1.0 / 3.0;
    const SplitResult r = chronological_split(ramp(9), SplitSpec{third, third, third}, 1);
    CHECK(r.train_targets == 3);
    CHECK(r.val_targets == 3);
    CHECK(r.test_targets == 3);
}

TEST_CASE("zero-ratio splits come back empty") {
    const SplitResult r = chronological_split(ramp(10), SplitSpec{0.8, 0.0, 0.2}, 2);
    CHECK(r.train_targets == 8);
    CHECK(r.val_targets == 0);
    CHECK(r.val.empty());
    CHECK(r.test_targets == 2);
}

TEST_CASE("chronological split validates its inputs") {
    CHECK_THROWS_AS((void)chronological_split(ramp(10), SplitSpec{0.5, 0.2, 0.2}, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)chronological_split(ramp(10), SplitSpec{-0.2, 0.6, 0.6}, 1),
                    std::invalid_argument);
    // lookback cannot reach back past the start of the preceding rows
    CHECK_THROWS_AS((void)chronological_split(ramp(10), SplitSpec{0.6, 0.2, 0.2}, 7),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)chronological_split(ramp(10), SplitSpec{0.98, 0.01, 0.01}, 1),
                    std::invalid_argument);
}

TEST_CASE("scaler uses population statistics and floors tiny deviations") {
    SeriesMatrix s;
    s.names = {"a", "b"};
    s.values = Matrix(4, 2);
    s.values.data = {1, 5, 2, 5, 3, 5, 4, 5};

    const ZScoreScaler sc = fit_scaler(s);
    CHECK(sc.mean[0] == doctest::Approx(2.5));
    CHECK(sc.std[0] == doctest::Approx(std::sqrt(1.25)));
    CHECK(sc.mean[1] == doctest::Approx(5.0));
    CHECK(sc.std[1] == 1e-8);

    const SeriesMatrix z = sc.transform(s);
    CHECK(z.at(0, 1) == 0.0);
    CHECK(z.at(0, 0) == doctest::Approx(-1.5 / std::sqrt(1.25)));

    const SeriesMatrix back = sc.inverse(z);
    for (std::size_t i = 0; i < s.values.data.size(); ++i) {
        CHECK(back.values.data[i] == doctest::Approx(s.values.data[i]).epsilon(1e-12));
    }

    CHECK_THROWS_AS((void)fit_scaler(ramp(1)), std::invalid_argument);
    CHECK_THROWS_AS((void)sc.transform(ramp(3, 3)), std::invalid_argument);
}

TEST_CASE("window enumeration counts and starts") {
    const SeriesMatrix s = ramp(10);
    WindowLayout w = make_windows(s, 3, 2, 1);
    CHECK(w.count() == 6);
    CHECK(w.starts.front() == 0);
    CHECK(w.starts.back() == 5);

    w = make_windows(s, 3, 2, 2);
    CHECK(w.count() == 3);
    CHECK(w.starts == std::vector<int>{0, 2, 4});

    CHECK(make_windows(ramp(4), 3, 2).count() == 0);
    CHECK(make_windows(ramp(5), 3, 2).count() == 1);
    CHECK_THROWS_AS((void)make_windows(s, 0, 2), std::invalid_argument);
    CHECK_THROWS_AS((void)make_windows(s, 3, 2, 0), std::invalid_argument);
}

TEST_CASE("gather_windows materializes inputs, anchor, and targets") {
    const SeriesMatrix s = ramp(10);
    const WindowLayout layout = make_windows(s, 3, 2, 1);
    const WindowBatch batch = gather_windows(s, layout, {1, 4});

    CHECK(batch.inputs.batch == 2);
    CHECK(batch.inputs.at(0, 0, 0) == 1.0);
    CHECK(batch.inputs.at(0, 2, 0) == 3.0);
    CHECK(batch.anchor.at(0, 0) == 3.0);
    CHECK(batch.targets.at(0, 0, 0) == 4.0);
    CHECK(batch.targets.at(0, 1, 0) == 5.0);
    CHECK(batch.inputs.at(1, 0, 0) == 4.0);
    CHECK(batch.anchor.at(1, 0) == 6.0);
    CHECK(batch.targets.at(1, 1, 0) == 8.0);

    const Tensor3 tail = batch.input_tail(2);
    CHECK(tail.steps == 2);
    CHECK(tail.at(0, 0, 0) == 2.0);
    CHECK(tail.at(0, 1, 0) == 3.0);

    CHECK_THROWS_AS((void)batch.input_tail(4), std::invalid_argument);
    CHECK_THROWS_AS((void)gather_windows(s, layout, {99}), std::invalid_argument);
}

TEST_CASE("synthetic generators are deterministic in the seed") {
    const SeriesMatrix a = gen_ar1(0.9, 1.0, 50, 3, 11);
    const SeriesMatrix b = gen_ar1(0.9, 1.0, 50, 3, 11);
    const SeriesMatrix c = gen_ar1(0.9, 1.0, 50, 3, 12);
    CHECK(a.values.data == b.values.data);
    CHECK(a.values.data != c.values.data);
    CHECK(a.rows() == 50);
    CHECK(a.cols() == 3);
    CHECK(a.names == std::vector<std::string>{"v0", "v1", "v2"});

    CHECK_THROWS_AS((void)gen_ar1(1.0, 1.0, 10, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS((void)gen_ar1(0.5, -1.0, 10, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS((void)gen_ar1(0.5, 1.0, 0, 1, 0), std::invalid_argument);
}

TEST_CASE("sine mix respects amplitudes and noise settings") {
    const std::vector<double> periods{8.0, 20.0};
    const std::vector<double> amps{1.0, 0.5};
    const SeriesMatrix clean = gen_sine_mix(periods, amps, 0.0, 200, 2, 5);
    const double bound = 1.5 + 1e-9;
    for (double v : clean.values.data) {
        CHECK(std::abs(v) <= bound);
    }
    const SeriesMatrix same = gen_sine_mix(periods, amps, 0.0, 200, 2, 5);
    CHECK(clean.values.data == same.values.data);

    CHECK_THROWS_AS((void)gen_sine_mix({}, {}, 0.0, 10, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS((void)gen_sine_mix({4.0}, {1.0, 2.0}, 0.0, 10, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS((void)gen_sine_mix({-4.0}, {1.0}, 0.0, 10, 1, 0), std::invalid_argument);
}

TEST_CASE("random walk accumulates increments") {
    const SeriesMatrix w = gen_random_walk(1.0, 30, 2, 3);
    CHECK(w.rows() == 30);
    const SeriesMatrix w2 = gen_random_walk(1.0, 30, 2, 3);
    CHECK(w.values.data == w2.values.data);
}

TEST_CASE("gaussian noise injection") {
    const SeriesMatrix s = ramp(40, 2);
    const SeriesMatrix same = inject_gaussian_noise(s, 0.0, 9);
    CHECK(same.values.data == s.values.data);

    const SeriesMatrix noisy = inject_gaussian_noise(s, 0.5, 9);
    CHECK(noisy.values.data != s.values.data);
    CHECK(noisy.values.data == inject_gaussian_noise(s, 0.5, 9).values.data);
    CHECK_THROWS_AS((void)inject_gaussian_noise(s, -1.0, 9), std::invalid_argument);
}

TEST_CASE("slice_rows bounds") {
    const SeriesMatrix s = ramp(5);
    const SeriesMatrix cut = s.slice_rows(1, 4);
    CHECK(cut.rows() == 3);
    CHECK(cut.at(0, 0) == 1.0);
    CHECK_THROWS_AS((void)s.slice_rows(-1, 3), std::invalid_argument);
    CHECK_THROWS_AS((void)s.slice_rows(2, 9), std::invalid_argument);
}

} // TEST_SUITE
