#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "spectf/serialize.hpp"

using namespace spectf;

namespace {

struct Toy {
    SpectraTable raw;
    IngestSchema schema;
};

Toy toy_table(int n, int p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::ostringstream csv;
    csv << "id,group,dose,response";
    for (int j = 0; j < p; ++j) csv << ',' << 1000 + 2 * j;
    csv << '\n';
    const char* groups[] = {"ctl", "low", "high"};
    for (int i = 0; i < n; ++i) {
        csv << "s" << i << ',' << groups[i % 3] << ',' << (i % 5) << ',' << 3.0 + nd(rng);
        for (int j = 0; j < p; ++j) csv << ',' << std::sin(0.3 * j + i) + 0.1 * nd(rng);
        csv << '\n';
    }
    Toy t;
    t.schema.aggregate = 2;
    std::istringstream in(csv.str());
    t.raw = read_csv(in, t.schema);
    return t;
}

} // namespace

TEST(Serialize, ModelRoundTripIsExact) {
    const Toy toy = toy_table(30, 12, 1);
    const SpectraTable data = preprocess(toy.raw, toy.schema);
    ModelOptions opts;
    opts.intercept = true;
    ModelDocument doc;
    doc.fit = fit_gaussian(data.absorbances, data.scalars, *data.response, PenaltySpec::mixed(4, 0.5, 1, 0.1), opts);
    doc.preprocessing = preprocessing_of(toy.raw, toy.schema, data);
    doc.config = {{"command", "fit"}, {"seed", 3}};

    const std::string text = to_json(doc).dump(2);
    const ModelDocument back = model_from_json(ojson::parse(text));
    EXPECT_EQ(to_json(back).dump(2), text);
    EXPECT_TRUE((back.fit.f_hat.array() == doc.fit.f_hat.array()).all());
    EXPECT_TRUE((back.fit.gamma_hat.array() == doc.fit.gamma_hat.array()).all());
    EXPECT_EQ(back.fit.penalty, doc.fit.penalty);
    EXPECT_EQ(back.fit.state.rho, doc.fit.state.rho);
    EXPECT_EQ(back.preprocessing->scalar_columns, (std::vector<std::string>{"group", "dose"}));
    EXPECT_EQ(back.config.at("seed"), 3);

    const Prediction a = predict(doc.fit, data.absorbances, data.scalars);
    const Prediction b = predict(back.fit, data.absorbances, data.scalars);
    EXPECT_TRUE((a.mean.array() == b.mean.array()).all());
}

TEST(Serialize, RejectsWrongFormatOrVersion) {
    EXPECT_THROW(model_from_json(ojson::parse(R"({"format": "other"})")), DataError);
    EXPECT_THROW(model_from_json(ojson::parse(R"({"format": "spectf-model", "version": 99})")), DataError);
    EXPECT_THROW(model_from_json(ojson::parse(R"({"format": "spectf-model", "version": 1})")), DataError);
}

TEST(Preprocessing, NewDataLandsOnTrainingGrid) {
    const Toy toy = toy_table(30, 12, 2);
    const SpectraTable data = preprocess(toy.raw, toy.schema);
    const Preprocessing pp = preprocessing_of(toy.raw, toy.schema, data);
    EXPECT_EQ(pp.raw_p, 12);
    EXPECT_EQ(pp.wavelengths.size(), 6);

    // the stored steps reproduce the processed training table
    const SpectraTable again = apply_preprocessing(toy.raw, pp);
    EXPECT_TRUE((again.absorbances.array() == data.absorbances.array()).all());
    EXPECT_TRUE((again.scalars.array() == data.scalars.array()).all());

    const Toy other = toy_table(10, 14, 3);
    try {
        apply_preprocessing(other.raw, pp);
        FAIL() << "expected a grid mismatch";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("12"), std::string::npos) << e.what();
    }
}

TEST(Preprocessing, PredictionSchemaKeepsLevels) {
    const Toy toy = toy_table(9, 4, 4);
    const SpectraTable data = preprocess(toy.raw, toy.schema);
    const Preprocessing pp = preprocessing_of(toy.raw, toy.schema, data);
    // new file with only one group present, in a different order
    const std::string csv =
        "id,dose,group,1000,1002,1004,1006\n"
        "n1,2,high,0.1,0.2,0.3,0.4\n";
    std::istringstream in(csv);
    const SpectraTable fresh = read_csv(in, prediction_schema(pp));
    EXPECT_FALSE(fresh.response);
    EXPECT_EQ(fresh.scalar_names, pp.scalar_names);
    const SpectraTable ready = apply_preprocessing(fresh, pp);
    EXPECT_EQ(ready.p(), 2);
    EXPECT_EQ(ready.scalars.row(0), Eigen::RowVector3d(0, 1, 2));
}

TEST(BandsCsv, LayoutAndFlags) {
    BootstrapBands bands;
    bands.estimate = Eigen::Vector2d(0.5, 0.0);
    bands.lower = Eigen::Vector2d(0.25, -0.5);
    bands.upper = Eigen::Vector2d(0.75, 0.5);
    bands.significant_mask = {true, false};
    bands.scalar_intervals.push_back({"dose", 1.0, 2.0, 3.0, true});
    std::ostringstream out, iv;
    write_bands_csv(bands, Eigen::Vector2d(1000, 1002), out);
    EXPECT_EQ(out.str(),
              "wavelength,estimate,lower,upper,significant\n"
              "1000,0.5,0.25,0.75,1\n"
              "1002,0,-0.5,0.5,0\n");
    write_intervals_csv(bands, iv);
    EXPECT_EQ(iv.str(), "covariate,estimate,lower,upper,significant\ndose,2,1,3,1\n");
    EXPECT_THROW(write_bands_csv(bands, Eigen::Vector3d(1, 2, 3), out), DimensionError);
}
