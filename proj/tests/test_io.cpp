#include "oracles.hpp"

#include "ssmar/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace ssmar;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("ssmar_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST(Csv, SplitHandlesQuotes) {
    EXPECT_EQ(io::split_csv_line("a,\"b,c\",\"d\"\"e\""), (std::vector<std::string>{"a", "b,c", "d\"e"}));
    EXPECT_EQ(io::split_csv_line("1,2\r"), (std::vector<std::string>{"1", "2"}));
    EXPECT_EQ(io::csv_escape("x,y"), "\"x,y\"");
    EXPECT_EQ(io::split_csv_line(io::csv_escape("q\"r,s")).front(), "q\"r,s");
}

TEST(Csv, DoublesRoundTripExactly) {
    for (double v : {0.1, -1e-300, 123456789.125, 1.0 / 3.0}) {
        double back = 0.0;
        ASSERT_TRUE(io::parse_double(io::format_double(v), back));
        EXPECT_EQ(back, v);
    }
    double x;
    EXPECT_FALSE(io::parse_double("1.5x", x));
    EXPECT_FALSE(io::parse_double("", x));
    EXPECT_TRUE(io::parse_double(" +2 ", x));
    EXPECT_EQ(x, 2.0);
}

TEST(Series, WriteReadRoundTripWithSidecar) {
    TempDir dir;
    Rng rng(1);
    const TimeSeriesMatrix y = make_series(Matrix::NullaryExpr(3, 20, [&] { return rng.normal(); }), 512.0, {"G1", "G2", "x,y"});
    write_series(dir / "rec.csv", y);
    EXPECT_TRUE(fs::exists(dir / "rec.json"));
    const TimeSeriesMatrix back = read_series(dir / "rec.csv");
    EXPECT_EQ(back.values, y.values);
    EXPECT_EQ(back.sample_rate_hz, 512.0);
    EXPECT_EQ(back.channel_labels, y.channel_labels);
}

TEST(Series, HeaderRowAndMissingRate) {
    TempDir dir;
    io::write_text(dir / "h.csv", "a,b\n1,2,3\n4,5,6\n");
    EXPECT_THROW(read_series(dir / "h.csv"), Error);
    const TimeSeriesMatrix y = read_series(dir / "h.csv", 100.0);
    EXPECT_EQ(y.values.rows(), 2);
    EXPECT_EQ(y.channel_labels, (std::vector<std::string>{"a", "b"}));
    io::write_text(dir / "wrong.csv", "a,b,c\n1,2,3\n4,5,6\n");
    EXPECT_THROW(read_series(dir / "wrong.csv", 100.0), Error);
    io::write_text(dir / "plain.csv", "1,2,3\n4,5,6\n");
    EXPECT_EQ(read_series(dir / "plain.csv", 100.0).channel_labels, (std::vector<std::string>{"ch1", "ch2"}));
}

TEST(Series, ErrorsNameTheProblem) {
    TempDir dir;
    io::write_text(dir / "ragged.csv", "1,2,3\n4,5\n");
    try {
        io::read_matrix_csv(dir / "ragged.csv");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
    io::write_text(dir / "bad.json", "{ not json");
    try {
        io::read_json(dir / "bad.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("bad.json"), std::string::npos);
    }
    EXPECT_THROW(io::read_text(dir / "missing.csv"), Error);
}

TEST(Json, ModelParamsRoundTripUsesOneBasedLabels) {
    Rng rng(2);
    const ModelParams s = oracle::random_params(4, 2, rng);
    const Json j = to_json(s);
    EXPECT_EQ(j["m"][0].get<int>(), 1);
    EXPECT_EQ(j["m"][1].get<int>(), 2);
    const ModelParams back = model_params_from_json(j);
    EXPECT_EQ(back.m, s.m);
    EXPECT_EQ(back.A, s.A);
    EXPECT_EQ(back.gamma, s.gamma);
    EXPECT_EQ(back.tau, s.tau);
}

TEST(Json, MissingFieldIsNamed) {
    Rng rng(3);
    Json j = to_json(oracle::random_params(2, 1, rng));
    j.erase("tau");
    try {
        model_params_from_json(j, "theta.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(std::string(e.what()), "theta.json: missing field 'tau'");
    }
}

TEST(Json, HyperparamsDefaultsAndScalarAlpha) {
    const Hyperparams h = hyperparams_from_json(Json{{"alpha", 2.5}, {"xi1", 3.0}}, default_hyperparams(3));
    EXPECT_EQ(h.alpha, Vector::Constant(3, 2.5));
    EXPECT_EQ(h.xi1, 3.0);
    EXPECT_EQ(h.l0, 0.9);
    EXPECT_THROW(hyperparams_from_json(Json{{"u0", 0.95}}, default_hyperparams(1)), Error);
    EXPECT_THROW(hyperparams_from_json(Json{{"xi0", "big"}}, default_hyperparams(1)), Error);
    const Hyperparams r = hyperparams_from_json(to_json(h), default_hyperparams(1));
    EXPECT_EQ(r.alpha, h.alpha);
}

TEST(Json, ChainAndSummaryRoundTrip) {
    ChainOutput c;
    c.gamma_sum = IMatrix::Constant(2, 2, 3);
    c.same_cluster_sum = IMatrix::Constant(2, 2, 5);
    c.n_retained = 5;
    c.trace_names = {"a", "b"};
    c.traces = Matrix::Random(5, 2);
    const ChainOutput back = chain_output_from_json(to_json(c));
    EXPECT_EQ(back.gamma_sum, c.gamma_sum);
    EXPECT_EQ(back.traces, c.traces);
    EXPECT_FALSE(to_json(c, false).contains("traces"));
    const PosteriorSummary s = posterior_summary(c);
    const PosteriorSummary sb = summary_from_json(to_json(s));
    EXPECT_EQ(sb.edge_prob, s.edge_prob);
    EXPECT_EQ(sb.num_samples, 5);
}

TEST(Json, NetworkOutputsAreOneBased) {
    PosteriorSummary s;
    s.clust_prob = Matrix::Identity(3, 3);
    s.clust_prob(0, 2) = 0.9;
    s.edge_prob = Matrix::Zero(3, 3);
    s.edge_prob(2, 0) = 0.97;
    const NetworkEstimate n = estimate_network(s, 0.5, 0.95);
    const Json j = to_json(n);
    EXPECT_EQ(j["clusters"][0], Json::array({1, 3}));
    EXPECT_EQ(j["edges"][0], Json::array({1, 3}));
    EXPECT_EQ(j["thresholds"]["threshold_gamma"].get<double>(), 0.95);
    EXPECT_EQ(edges_csv(n, s), "from,to,probability\n1,3,0.97\n");
    EXPECT_EQ(membership_csv(n), "node,cluster\n1,1\n2,2\n3,1\n");
}

TEST(Json, TruthRoundTrip) {
    Example1Config cfg;
    cfg.cluster_sizes = {2, 3};
    cfg.T = 50;
    const GroundTruth g = generate_example1(cfg).truth;
    const GroundTruth back = truth_from_json(to_json(g));
    EXPECT_EQ(back.adjacency, g.adjacency);
    EXPECT_EQ(back.labels, g.labels);
    EXPECT_EQ(back.lag_coeffs[2], g.lag_coeffs[2]);
    Json bad = to_json(g);
    bad["true_edges"].push_back(Json::array({9, 1}));
    EXPECT_THROW(truth_from_json(bad), Error);
}

TEST(Csv, RocAndTrace) {
    RocCurve rc;
    rc.points = {{std::numeric_limits<double>::infinity(), 0, 0}, {0.5, 0.25, 1}};
    EXPECT_EQ(roc_csv(rc), "threshold,fpr,tpr\ninf,0,0\n0.5,0.25,1\n");
    EXPECT_EQ(trace_csv({-1.5, -1.25}), "iteration,objective\n0,-1.5\n1,-1.25\n");
}
