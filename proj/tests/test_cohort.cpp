#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "longreg/cohort.hpp"
#include "longreg/lvr_io.hpp"

using namespace longreg;

namespace {

// Four patients, visit counts 2,3,2,4, tiny 8^3 volumes on disk.
LongitudinalDataset make_cohort(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const int nvisits[4] = {2, 3, 2, 4};
    LongitudinalDataset ds;
    Rng rng(99);
    for (int p = 0; p < 4; ++p) {
        Patient pat;
        pat.id = "p" + std::to_string(p);
        for (int v = 0; v < nvisits[p]; ++v) {
            Volume3D img({8, 8, 8}, {1, 1, 1});
            for (auto& x : img.data) x = float(rng.uniform());
            Volume3D msk({8, 8, 8}, {1, 1, 1});
            msk.at(3 + p % 2, 4, 4) = 1.f;

            Visit visit;
            visit.time_months = 12.0 * v;
            visit.image_path =
                (dir / (pat.id + "_v" + std::to_string(v) + "_img.lvr"))
                    .string();
            visit.mask_path =
                (dir / (pat.id + "_v" + std::to_string(v) + "_msk.lvr"))
                    .string();
            write_volume(visit.image_path, img);
            write_volume(visit.mask_path, msk);
            pat.visits.push_back(visit);
        }
        ds.patients.push_back(pat);
    }
    return ds;
}

const std::filesystem::path kDir =
    std::filesystem::temp_directory_path() / "longreg_cohort";

} // namespace

TEST_CASE("dataset validation") {
    LongitudinalDataset ds;
    Patient p;
    p.id = "a";
    p.visits.resize(1);
    ds.patients.push_back(p);
    CHECK_THROWS_AS(ds.validate(), std::invalid_argument); // one visit

    ds.patients[0].visits.resize(2);
    ds.patients[0].visits[0].time_months = 5;
    ds.patients[0].visits[1].time_months = 5; // not increasing
    CHECK_THROWS_AS(ds.validate(), std::invalid_argument);

    ds.patients[0].visits[1].time_months = 9;
    CHECK_NOTHROW(ds.validate());

    ds.patients[0].visits.resize(5); // too many
    CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
}

TEST_CASE("manifest roundtrip") {
    const LongitudinalDataset ds = make_cohort(kDir);
    const auto path = (kDir / "manifest.txt").string();
    save_manifest(path, ds);
    const LongitudinalDataset back = load_manifest(path);
    REQUIRE(back.patients.size() == ds.patients.size());
    for (std::size_t i = 0; i < ds.patients.size(); ++i) {
        CHECK(back.patients[i].id == ds.patients[i].id);
        REQUIRE(back.patients[i].visits.size() == ds.patients[i].visits.size());
        for (std::size_t v = 0; v < ds.patients[i].visits.size(); ++v) {
            CHECK(back.patients[i].visits[v].image_path ==
                  ds.patients[i].visits[v].image_path);
            CHECK(back.patients[i].visits[v].time_months ==
                  ds.patients[i].visits[v].time_months);
        }
    }

    SUBCASE("comments and blanks are skipped") {
        std::ofstream os(kDir / "sparse.txt");
        os << "# heading\n\n";
        const auto& v0 = ds.patients[0].visits[0];
        const auto& v1 = ds.patients[0].visits[1];
        os << "px,0," << v0.image_path << ',' << v0.mask_path << ",\n";
        os << "px,6," << v1.image_path << ',' << v1.mask_path << ",\n";
        os.close();
        const auto sparse = load_manifest((kDir / "sparse.txt").string());
        CHECK(sparse.patients.size() == 1);
        CHECK(sparse.patients[0].visits.size() == 2);
    }
    SUBCASE("missing files are reported") {
        std::ofstream os(kDir / "missing.txt");
        os << "px,0,/nonexistent/a.lvr,/nonexistent/b.lvr,\n";
        os << "px,6,/nonexistent/c.lvr,/nonexistent/d.lvr,\n";
        os.close();
        CHECK_THROWS(load_manifest((kDir / "missing.txt").string()));
        CHECK_NOTHROW(load_manifest((kDir / "missing.txt").string(), false));
    }
}

TEST_CASE("patient split") {
    const LongitudinalDataset ds = make_cohort(kDir);
    const auto s1 = split_patients(ds, {2, 1, 1}, 31);
    const auto s2 = split_patients(ds, {2, 1, 1}, 31);
    const auto s3 = split_patients(ds, {2, 1, 1}, 32);

    CHECK(s1[0].patients.size() == 2);
    CHECK(s1[1].patients.size() == 1);
    CHECK(s1[2].patients.size() == 1);

    std::set<std::string> seen;
    for (const auto& part : s1)
        for (const auto& p : part.patients) CHECK(seen.insert(p.id).second);
    CHECK(seen.size() == 4);

    for (int part = 0; part < 3; ++part)
        for (std::size_t i = 0; i < s1[part].patients.size(); ++i)
            CHECK(s1[part].patients[i].id == s2[part].patients[i].id);

    std::vector<std::string> order1, order3;
    for (const auto& part : s1)
        for (const auto& p : part.patients) order1.push_back(p.id);
    for (const auto& part : s3)
        for (const auto& p : part.patients) order3.push_back(p.id);
    CHECK(order1 != order3); // a different seed shuffles differently

    CHECK_THROWS_AS(split_patients(ds, {3, 1, 1}, 1), std::invalid_argument);
}

TEST_CASE("pair sampling") {
    const LongitudinalDataset ds = make_cohort(kDir);
    VolumeStore store;
    Rng rng(4);

    SUBCASE("IF pairs run forward in time") {
        for (int i = 0; i < 200; ++i) {
            const PairSample s = sample_pair(ds, store, PairType::IF, rng);
            CHECK(s.tag == PairType::IF);
            CHECK(s.moving_patient == s.fixed_patient);
            CHECK(s.moving_visit < s.fixed_visit);
        }
    }
    SUBCASE("IB pairs run backward in time") {
        for (int i = 0; i < 200; ++i) {
            const PairSample s = sample_pair(ds, store, PairType::IB, rng);
            CHECK(s.moving_patient == s.fixed_patient);
            CHECK(s.moving_visit > s.fixed_visit);
        }
    }
    SUBCASE("IT pairs cross patients") {
        for (int i = 0; i < 200; ++i) {
            const PairSample s = sample_pair(ds, store, PairType::IT, rng);
            CHECK(s.tag == PairType::IT);
            CHECK(s.moving_patient != s.fixed_patient);
        }
    }
    SUBCASE("all ordered intra pairs are reachable") {
        std::set<std::string> seen;
        for (int i = 0; i < 2000; ++i) {
            const PairSample s = sample_pair(ds, store, PairType::IF, rng);
            seen.insert(s.moving_patient + "/" +
                        std::to_string(s.moving_visit) + "-" +
                        std::to_string(s.fixed_visit));
        }
        // 1 + 3 + 1 + 6 ordered forward pairs across the four patients
        CHECK(seen.size() == 11);
    }
}

TEST_CASE("minibatch composition") {
    const LongitudinalDataset ds = make_cohort(kDir);
    VolumeStore store;
    Rng rng(8);

    SUBCASE("IF strategy fills the batch with IF") {
        const auto b = compose_minibatch(ds, store, Strategy::IF, 4, rng);
        REQUIRE(b.size() == 4);
        for (const auto& s : b) CHECK(s.tag == PairType::IF);
    }
    SUBCASE("IF+IB balances the two directions") {
        for (int trial = 0; trial < 50; ++trial) {
            const auto b =
                compose_minibatch(ds, store, Strategy::IF_IB, 4, rng);
            int nf = 0, nb = 0;
            for (const auto& s : b) (s.tag == PairType::IF ? nf : nb)++;
            CHECK(nf == 2);
            CHECK(nb == 2);
        }
    }
    SUBCASE("IT+IF+IB balances intra against inter") {
        for (int trial = 0; trial < 50; ++trial) {
            const auto b =
                compose_minibatch(ds, store, Strategy::IT_IF_IB, 4, rng);
            int intra = 0, inter = 0;
            for (const auto& s : b)
                (s.tag == PairType::IT ? inter : intra)++;
            CHECK(intra == 2);
            CHECK(inter == 2);
        }
    }
    SUBCASE("mixed strategies need an even batch") {
        CHECK_THROWS_AS(compose_minibatch(ds, store, Strategy::IF_IB, 3, rng),
                        std::invalid_argument);
    }
}

TEST_CASE("affine augmentation") {
    const LongitudinalDataset ds = make_cohort(kDir);
    VolumeStore store;
    Rng rng(12);
    const PairSample s = sample_pair(ds, store, PairType::IF, rng);

    SUBCASE("magnitude zero is a no-op") {
        Rng r1(3);
        const PairSample out = random_affine_augment(s, 0.0, r1);
        CHECK(out.moving_image.data == s.moving_image.data);
        CHECK(out.fixed_image.data == s.fixed_image.data);
        // and consumes no randomness
        Rng r2(3);
        CHECK(r1.next_u64() == r2.next_u64());
    }
    SUBCASE("same seed, same augmentation") {
        Rng r1(5), r2(5);
        const PairSample a = random_affine_augment(s, 0.5, r1);
        const PairSample b = random_affine_augment(s, 0.5, r2);
        CHECK(a.moving_image.data == b.moving_image.data);
        CHECK(a.fixed_image.data == b.fixed_image.data);
    }
    SUBCASE("nonzero magnitude changes the images") {
        Rng r(6);
        const PairSample a = random_affine_augment(s, 0.5, r);
        CHECK(a.moving_image.data != s.moving_image.data);
    }
}

TEST_CASE("strategy names") {
    CHECK(strategy_from_string("if") == Strategy::IF);
    CHECK(strategy_from_string("if+ib") == Strategy::IF_IB);
    CHECK(strategy_from_string("it+if+ib") == Strategy::IT_IF_IB);
    CHECK_THROWS_AS(strategy_from_string("nope"), std::invalid_argument);
    CHECK(std::string(to_string(Strategy::IF_IB)) == "if+ib");
}
