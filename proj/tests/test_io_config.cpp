#include <chainmapper/chainmap.hpp>
#include <chainmapper/config.hpp>
#include <chainmapper/io.hpp>
#include <chainmapper/pipeline.hpp>
#include <chainmapper/single_excitation.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <unistd.h>

using namespace chainmapper;
namespace fs = std::filesystem;

namespace {

// fresh scratch directory per test, removed afterwards
struct Scratch {
    fs::path dir;
    explicit Scratch(const std::string& tag)
    {
        dir = fs::temp_directory_path() / ("chainmapper_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
};

RunConfig coeffs_config(const fs::path& out)
{
    RunConfig c;
    c.mode = Mode::coeffs;
    c.spectral.family = Ohmic{1.0, 1.0, 100.0};
    c.spectral.hard_cutoff = 1000.0;
    c.chain.N = 60;
    c.chain.M = 400;
    c.output.directory = out.string();
    return c;
}

RunConfig single_config(const fs::path& out)
{
    RunConfig c;
    c.mode = Mode::single;
    c.spectral.family = Lorentzian{60.0, 10.0, 100.0};
    DynamicsConfig d;
    d.t_max = 0.2;
    d.time_steps = 400;
    c.dynamics = d;
    c.output.directory = out.string();
    c.output.formats = {"csv"};
    return c;
}

std::string config_error_path(const std::string& text)
{
    try {
        (void)parse_config(text);
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "<no error>";
}

fs::path file_with_suffix(const RunResult& r, const std::string& suffix)
{
    for (const auto& f : r.files) {
        const auto s = f.filename().string();
        if (s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0 &&
            (suffix != ".csv" || s.find(".coeffs.csv") == std::string::npos)) {
            return f;
        }
    }
    return {};
}

} // namespace

TEST(Csv, SeventeenDigitsRoundTrip)
{
    const double x = 0.1 + 0.2;
    EXPECT_EQ(std::stod(io::format_double(x)), x);
    EXPECT_EQ(std::stod(io::format_double(1.0 / 3.0)), 1.0 / 3.0);

    const auto sd = SpectralDensity(Lorentzian{60.0, 10.0, 100.0}, 1000.0);
    const auto chain = map_to_chain(sd, 20, 400);
    const auto times = uniform_grid(0.05, 50);
    const auto traj = propagate(TridiagonalHamiltonian::from_chain(chain), site_state(20, 1), times);
    const auto table = io::parse_csv(io::trajectory_csv(traj));
    ASSERT_EQ(table.header.front(), "t");
    ASSERT_EQ(table.header.size(), 21u);
    EXPECT_EQ(table.header[1], "p_1");
    ASSERT_EQ(table.rows.size(), times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        EXPECT_EQ(table.rows[i][0], times[i]);
        for (std::size_t k = 0; k < 20; ++k) {
            EXPECT_EQ(table.rows[i][k + 1], traj.populations(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
        }
    }
    EXPECT_THROW(table.column("p_99"), ParameterError);
}

TEST(CoefficientJson, BitExactRoundTrip)
{
    const auto sd = SpectralDensity(Ohmic{1.0, 0.5, 100.0}, 1000.0, 300.0);
    const auto chain = map_to_chain(sd, 30, 400);
    const auto back = io::parse_coefficients(io::dump_coefficients(chain));
    EXPECT_EQ(back.kappa0, chain.kappa0);
    EXPECT_EQ(back.omegas, chain.omegas);
    EXPECT_EQ(back.kappas, chain.kappas);
    EXPECT_EQ(back.support.lo, chain.support.lo);
    EXPECT_EQ(back.support.hi, chain.support.hi);
    EXPECT_EQ(back.metadata.temperature_K, 300.0);
    EXPECT_EQ(back.metadata.node_count, chain.metadata.node_count);
    EXPECT_EQ(back.metadata.family, chain.metadata.family);
    EXPECT_EQ(back.metadata.family_parameters, chain.metadata.family_parameters);
}

TEST(CoefficientJson, StrictErrorsNameThePath)
{
    const auto chain = map_to_chain(SpectralDensity(Ohmic{1.0, 1.0, 100.0}, 1000.0), 5, 40);
    auto path_of = [](const io::json& j) {
        try {
            (void)io::coefficients_from_json(j);
        } catch (const ConfigError& e) {
            return e.path();
        }
        return std::string("<no error>");
    };
    io::json j = io::to_json(chain);
    j["extra"] = 1;
    EXPECT_EQ(path_of(j), "extra");
    j = io::to_json(chain);
    j["kappas"][2] = "x";
    EXPECT_EQ(path_of(j), "kappas[2]");
    j = io::to_json(chain);
    j["kappas"].erase(0);
    EXPECT_EQ(path_of(j), "kappas");
    j = io::to_json(chain);
    j["metadata"].erase("node_count");
    EXPECT_EQ(path_of(j), "metadata.node_count");
    j = io::to_json(chain);
    j["version"] = 99;
    EXPECT_EQ(path_of(j), "version");
    EXPECT_THROW(io::parse_coefficients("{not json"), ConfigError);
}

TEST(Config, PresetsRoundTrip)
{
    for (const auto& name : preset_names()) {
        for (const auto& c : figure_presets(name)) {
            const auto text = dump_config(c);
            EXPECT_EQ(parse_config(text), c) << name << " " << c.variant;
            EXPECT_EQ(dump_config(parse_config(text)), text);
        }
    }
}

TEST(Config, ShippedExamplesParse)
{
    for (const auto& entry : fs::directory_iterator(fs::path(CHAINMAPPER_SOURCE_DIR) / "configs")) {
        EXPECT_NO_THROW({
            const auto c = parse_config(io::read_file(entry.path()));
            validate_for_mode(c);
        }) << entry.path();
    }
}

TEST(Config, ErrorsNameKeyPath)
{
    auto base = to_json(figure_presets("full-ohmic").front());
    auto j = base;
    j["dynamics"]["controls"]["dtt"] = j["dynamics"]["controls"]["dt"];
    j["dynamics"]["controls"].erase("dt");
    EXPECT_EQ(config_error_path(j.dump()), "dynamics.controls.dtt");

    j = base;
    j["dynamics"].erase("delta");
    try {
        validate_for_mode(parse_config(j.dump()));
        FAIL() << "missing delta accepted";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.path(), "dynamics.delta");
        EXPECT_NE(std::string(e.what()).find("dynamics.delta"), std::string::npos);
    }

    j = base;
    j["spectral"]["parameters"]["s"] = -1.0;
    EXPECT_EQ(config_error_path(j.dump()), "spectral.parameters.s");
    j = base;
    j["mode"] = "frobnicate";
    EXPECT_EQ(config_error_path(j.dump()), "mode");
    j = base;
    j["spectral"]["family"] = "gaussian";
    EXPECT_EQ(config_error_path(j.dump()), "spectral.family");
    EXPECT_THROW(parse_config("[1, 2"), ConfigError);
}

TEST(Config, PresetContents)
{
    const auto lt0 = figure_presets("lorentz-T0");
    ASSERT_EQ(lt0.size(), 3u);
    for (const auto& c : lt0) {
        const auto& f = std::get<Lorentzian>(c.spectral.family);
        EXPECT_EQ(f.omega0, 100.0);
        EXPECT_EQ(f.lambda, 60.0);
        EXPECT_EQ(c.spectral.hard_cutoff, 1000.0);
        EXPECT_EQ(c.spectral.temperature_K, 0.0);
        EXPECT_EQ(c.mode, Mode::single);
    }
    EXPECT_EQ(std::get<Lorentzian>(lt0[0].spectral.family).gamma, 0.001);
    EXPECT_EQ(lt0[0].variant, "gamma0.001_T0");

    const auto oft = figure_presets("ohmic-finiteT");
    ASSERT_EQ(oft.size(), 3u);
    for (const auto& c : oft) {
        EXPECT_EQ(std::get<Ohmic>(c.spectral.family).omega_c, 100.0);
        EXPECT_EQ(c.spectral.temperature_K, 300.0);
    }
    EXPECT_EQ(oft[0].variant, "s0.5_T300");

    const auto fo = figure_presets("full-ohmic");
    ASSERT_EQ(fo.size(), 9u);
    for (const auto& c : fo) {
        EXPECT_EQ(c.mode, Mode::full);
        ASSERT_TRUE(c.dynamics && c.dynamics->delta);
        EXPECT_EQ(*c.dynamics->delta, 70.0);
        EXPECT_EQ(std::get<Ohmic>(c.spectral.family).lambda, 1.0);
        EXPECT_NO_THROW(validate_for_mode(c));
    }
    EXPECT_EQ(figure_presets("lorentz-finiteT").size(), 6u);
    EXPECT_THROW(figure_presets("nope"), ConfigError);
}

TEST(Config, HashIgnoresOutputDirectory)
{
    auto a = coeffs_config("/tmp/a");
    auto b = coeffs_config("/tmp/b");
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash_hex(a).size(), 16u);
    b.chain.N = 61;
    EXPECT_NE(config_hash(a), config_hash(b));
    b = a;
    b.spectral.temperature_K = 1.0;
    EXPECT_NE(config_hash(a), config_hash(b));
    b = a;
    b.spectral.family = Ohmic{1.0, 1.0000001, 100.0};
    EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Io, WriteAtomicLeavesOnlyTarget)
{
    Scratch s("atomic");
    const auto p = s.dir / "nested" / "x.txt";
    io::write_atomic(p, "first\n");
    io::write_atomic(p, "second\n");
    EXPECT_EQ(io::read_file(p), "second\n");
    std::size_t n = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(p.parent_path())) {
        ++n;
    }
    EXPECT_EQ(n, 1u);
    EXPECT_THROW(io::read_file(s.dir / "missing"), IoError);
}

TEST(Pipeline, CoeffsMatchAsymptotics)
{
    Scratch s("coeffs");
    const auto r = run(coeffs_config(s.dir));
    ASSERT_EQ(r.exit_code, 0) << r.message;
    const auto json_path = file_with_suffix(r, ".coeffs.json");
    ASSERT_FALSE(json_path.empty());
    const auto chain = io::parse_coefficients(io::read_file(json_path));
    ASSERT_EQ(chain.omegas.size(), 60u);
    EXPECT_NEAR(chain.omegas[59], 500.0, 5.0);
    EXPECT_NEAR(chain.kappas[58], 250.0, 2.5);

    const auto table = io::parse_csv(io::read_file(file_with_suffix(r, ".coeffs.csv")));
    EXPECT_EQ(table.header, (std::vector<std::string>{"n", "omega_n", "kappa_n"}));
    EXPECT_EQ(table.rows[10][1], chain.omegas[10]);
    EXPECT_TRUE(fs::exists(file_with_suffix(r, ".manifest.json")));
    const auto manifest = io::json::parse(io::read_file(file_with_suffix(r, ".manifest.json")));
    EXPECT_EQ(manifest.at("config_hash").get<std::string>(), config_hash_hex(coeffs_config(s.dir)));
}

TEST(Pipeline, SingleCsvRecoversDecayRate)
{
    Scratch s("single");
    const auto r = run(single_config(s.dir));
    ASSERT_EQ(r.exit_code, 0) << r.message;
    const auto table = io::parse_csv(io::read_file(file_with_suffix(r, ".csv")));
    std::vector<double> t, p1;
    for (const auto& row : table.rows) {
        t.push_back(row[table.column("t")]);
        p1.push_back(row[table.column("p_1")]);
    }
    EXPECT_EQ(t.size(), 401u);
    EXPECT_NEAR(fit_decay_rate(t, p1, default_decay_window(10.0, t)), 10.0, 1.0);
}

TEST(Pipeline, Deterministic)
{
    Scratch a("det_a"), b("det_b");
    const auto ra = run(single_config(a.dir));
    const auto rb = run(single_config(b.dir));
    ASSERT_EQ(ra.exit_code, 0);
    ASSERT_EQ(rb.exit_code, 0);
    ASSERT_EQ(ra.files.size(), rb.files.size());
    for (std::size_t i = 0; i < ra.files.size(); ++i) {
        EXPECT_EQ(ra.files[i].filename(), rb.files[i].filename());
        auto ta = io::read_file(ra.files[i]);
        auto tb = io::read_file(rb.files[i]);
        if (ra.files[i].string().find("manifest") != std::string::npos) {
            // the manifest records its own output directory
            auto ja = io::json::parse(ta), jb = io::json::parse(tb);
            ja["config"]["output"].erase("directory");
            jb["config"]["output"].erase("directory");
            EXPECT_EQ(ja, jb);
        } else {
            EXPECT_EQ(ta, tb) << ra.files[i];
        }
    }
}

TEST(Pipeline, ExitCodes)
{
    Scratch s("exit");
    auto c = single_config(s.dir);
    c.mode = Mode::full;
    auto r = run(c);
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.message.find("dynamics.delta"), std::string::npos);

    c = coeffs_config(s.dir);
    c.spectral.family = Tabulated{{0.0, 500.0, 1000.0}, {0.0, 0.0, 0.0}};
    r = run(c);
    EXPECT_EQ(r.exit_code, 2) << r.message;

    // a regular file where the output directory should be
    const auto blocker = s.dir / "blocker";
    io::write_atomic(blocker, "x");
    c = coeffs_config(blocker / "sub");
    r = run(c);
    EXPECT_EQ(r.exit_code, 3) << r.message;
}

TEST(Pipeline, RunAllKeepsOrder)
{
    Scratch s("all");
    std::vector<RunConfig> cs;
    for (std::size_t n : {10u, 20u, 30u}) {
        auto c = coeffs_config(s.dir);
        c.chain.N = n;
        c.chain.M = 200;
        cs.push_back(c);
    }
    auto bad = single_config(s.dir);
    bad.mode = Mode::full;
    cs.insert(cs.begin() + 1, bad);
    const auto rs = run_all(cs, 3);
    ASSERT_EQ(rs.size(), 4u);
    EXPECT_EQ(rs[0].exit_code, 0);
    EXPECT_EQ(rs[1].exit_code, 1);
    EXPECT_EQ(rs[2].exit_code, 0);
    EXPECT_NE(rs[3].files.front().string().find(artifact_stem(cs[3])), std::string::npos);
    EXPECT_EQ(combined_exit_code(rs), 1);
    EXPECT_EQ(combined_exit_code({rs[0], rs[2]}), 0);
}

TEST(Csv, EmptyCellsReadAsNaN)
{
    const auto t = io::parse_csv("n,omega_n,kappa_n\n1,2,3\n2,4,\n");
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_TRUE(std::isnan(t.rows[1][2]));
    EXPECT_THROW(io::parse_csv("a,b\n1\n"), ParameterError);
    EXPECT_THROW(io::parse_csv("a,b\n1,x\n"), ParameterError);
}
