#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dni/ragged_store.hpp"
#include "helpers.hpp"

using namespace dni;
namespace fs = std::filesystem;

namespace {

Dataset fixture(std::size_t participants = 2, std::size_t days = 2, std::size_t k = 4, std::size_t len = 50) {
  Dataset ds;
  for (std::size_t p = 0; p < participants; ++p) {
    const auto pid = ds.recording.add_participant(k);
    std::vector<Position> geom;
    for (std::size_t e = 0; e < k; ++e) geom.push_back({double(e), 0.5 * p, 0.0});
    ds.geometry.positions.push_back(geom);
    for (std::size_t d = 0; d < days; ++d) {
      DayRecording day;
      day.rate_hz = 500.0;
      day.samples = len;
      day.missing.assign(k, 0);
      for (std::size_t e = 0; e < k; ++e) day.electrodes.push_back(testing::gaussian(len, 1000 * p + 10 * d + e));
      ds.recording.add_day(pid, std::move(day));
    }
  }
  return ds;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("dni_store_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_SUITE("ragged-store") {
  TEST_CASE("save and load round-trip bit-exactly") {
    const auto ds = fixture();
    const auto dir = scratch("roundtrip");
    save_dataset(ds, dir);
    const auto back = load_dataset(dir);
    REQUIRE(back.recording.participant_count() == 2);
    for (ParticipantId p = 0; p < 2; ++p) {
      CHECK(back.recording.electrode_count(p) == 4);
      CHECK(back.recording.day_count(p) == 2);
      for (DayId d = 0; d < 2; ++d) {
        const auto avail = availability(back.recording, p, d);
        CHECK(avail.observed.size() == 4);
        CHECK(avail.missing.empty());
        for (ElectrodeId e = 0; e < 4; ++e) {
          const auto a = ds.recording.samples(p, d, e), b = back.recording.samples(p, d, e);
          CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
        }
      }
      for (ElectrodeId e = 0; e < 4; ++e) CHECK(back.geometry.positions[p][e].y == ds.geometry.positions[p][e].y);
    }
  }

  TEST_CASE("declared missing electrode propagates and stores no payload") {
    auto ds = fixture();
    auto& day = ds.recording.day(0, 1);
    day.missing[3] = 1;
    day.electrodes[3].clear();
    const auto dir = scratch("missing");
    save_dataset(ds, dir);
    CHECK_FALSE(fs::exists(dir / "data" / "p0_d1_e3.f32"));
    const auto back = load_dataset(dir);
    const auto avail = availability(back.recording, 0, 1);
    CHECK(avail.missing == std::vector<ElectrodeId>{3});
    CHECK(avail.observed == std::vector<ElectrodeId>{0, 1, 2});
  }

  TEST_CASE("truncated payload names the location") {
    const auto ds = fixture();
    const auto dir = scratch("truncated");
    save_dataset(ds, dir);
    const auto file = dir / "data" / "p1_d0_e2.f32";
    fs::resize_file(file, fs::file_size(file) - 4);
    try {
      load_dataset(dir);
      FAIL("expected a length mismatch");
    } catch (const DatasetError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("length mismatch") != std::string::npos);
      CHECK(msg.find("participant 1, day 0, electrode 2") != std::string::npos);
    }
  }

  TEST_CASE("missing payload and non-finite samples are rejected") {
    auto ds = fixture();
    const auto dir = scratch("nonfinite");
    save_dataset(ds, dir);
    fs::remove(dir / "data" / "p0_d0_e1.f32");
    CHECK_THROWS_AS(load_dataset(dir), DatasetError);

    ds.recording.day(0, 0).electrodes[1][7] = std::nanf("");
    CHECK_THROWS_AS(ds.recording.validate(), DatasetError);
  }

  TEST_CASE("availability partitions the electrode set") {
    RaggedRecording rec;
    const auto p = rec.add_participant(10);
    DayRecording day;
    day.samples = 5;
    day.missing.assign(10, 0);
    day.electrodes.resize(10);
    for (ElectrodeId e = 0; e < 10; ++e) {
      if (e == 2 || e == 7) {
        day.missing[e] = 1;
      } else {
        day.electrodes[e].assign(5, 1.0f);
      }
    }
    rec.add_day(p, day);
    const auto a = availability(rec, p, 0);
    CHECK(a.missing == std::vector<ElectrodeId>{2, 7});
    CHECK(a.observed == std::vector<ElectrodeId>{0, 1, 3, 4, 5, 6, 8, 9});
    CHECK(a.observed.size() + a.missing.size() == 10);
    CHECK_FALSE(a.degenerate);

    DayRecording empty;
    empty.samples = 5;
    empty.missing.assign(10, 1);
    empty.electrodes.resize(10);
    rec.add_day(p, empty);
    const auto b = availability(rec, p, 1);
    CHECK(b.observed.empty());
    CHECK(b.degenerate);
    CHECK_THROWS_AS(availability(rec, p, 5), DatasetError);
    CHECK_THROWS_AS(availability(rec, 3, 0), DatasetError);
    CHECK(rec.test_day(p) == 1);
  }

  TEST_CASE("slice_instances counts and truncation") {
    auto ds = fixture(1, 1, 3, 1200);
    CHECK(slice_instances(ds.recording, 0, 0, 400, 400).size() == 3);
    ds = fixture(1, 1, 3, 1000);
    const auto two = slice_instances(ds.recording, 0, 0, 400, 400);
    REQUIRE(two.size() == 2);
    CHECK(two[1].signal.at(1, 0) == ds.recording.samples(0, 0, 1)[400]);
    ds = fixture(1, 1, 3, 300);
    CHECK(slice_instances(ds.recording, 0, 0, 400, 400).empty());
    for (std::size_t len : {400, 401, 777, 1500})
      for (std::size_t stride : {1, 7, 100, 400}) {
        ds = fixture(1, 1, 2, len);
        CHECK(slice_instances(ds.recording, 0, 0, 400, stride).size() == (len - 400) / stride + 1);
      }
  }

  TEST_CASE("missing electrodes slice as flagged zero rows") {
    auto ds = fixture(1, 1, 3, 800);
    ds.recording.day(0, 0).missing[1] = 1;
    ds.recording.day(0, 0).electrodes[1].clear();
    const auto inst = slice_instances(ds.recording, 0, 0, 400, 400);
    REQUIRE(inst.size() == 2);
    CHECK(inst[0].missing[1] == 1);
    for (float v : inst[0].signal.row(1)) CHECK(v == 0.0f);
  }
}
