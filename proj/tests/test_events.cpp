#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "satop/events.hpp"
#include "test_util.hpp"

using namespace satop;

namespace {

std::vector<ParkingSpot> make_spots(int n) {
    std::vector<ParkingSpot> spots;
    for (int i = 0; i < n; ++i) spots.push_back({i, 0, 0.5, 0, 0, 3600});
    return spots;
}

// independent interval-sweep overlap check
bool has_overlap(const EventLog& log) {
    std::map<int, std::vector<std::pair<double, double>>> per_spot;
    for (const ParkingEvent& e : log.events) per_spot[e.spot].push_back({e.arrival, e.departure});
    for (auto& [_, iv] : per_spot) {
        std::sort(iv.begin(), iv.end());
        for (size_t i = 1; i < iv.size(); ++i)
            if (iv[i].first < iv[i - 1].second) return true;
    }
    return false;
}

// status at probe time by direct interval membership
int status_at(const EventLog& log, int spot, double t) {
    for (const ParkingEvent& e : log.events) {
        if (e.spot != spot || t < e.arrival || t >= e.departure) continue;
        return t >= e.arrival + e.max_duration ? 2 : 1; // violation : occupied
    }
    return 0; // free
}

} // namespace

TEST_CASE("single event with violation onset") {
    auto dir = testutil::temp_dir("events");
    auto path = testutil::write_file(dir / "one.csv",
                                     "date,spot_id,arrival_s,departure_s,max_duration_s\n"
                                     "2019-03-04,0,28800,37800,7200\n");
    auto logs = load_events(path, make_spots(1));
    REQUIRE(logs.size() == 1);
    const EventLog& log = logs.at("2019-03-04");
    REQUIRE(log.events.size() == 1);
    auto tl = event_timeline(log);
    REQUIRE(tl.size() == 3);
    CHECK(tl[0].change == StatusChange::Occupied);
    CHECK(tl[0].time == 28800);
    CHECK(tl[1].change == StatusChange::InViolation);
    CHECK(tl[1].time == 36000); // 10:00, arrival + max duration
    CHECK(tl[2].change == StatusChange::Free);
}

TEST_CASE("rows out of order are sorted by arrival") {
    auto dir = testutil::temp_dir("events");
    auto path = testutil::write_file(dir / "unordered.csv",
                                     "date,spot_id,arrival_s,departure_s,max_duration_s\n"
                                     "2019-01-02,1,40000,41000,3600\n"
                                     "2019-01-02,0,10000,11000,3600\n"
                                     "2019-01-02,1,20000,21000,3600\n");
    auto logs = load_events(path, make_spots(2));
    const EventLog& log = logs.at("2019-01-02");
    REQUIRE(log.events.size() == 3);
    CHECK(log.events[0].arrival == 10000);
    CHECK(log.events[1].arrival == 20000);
    CHECK(log.events[2].arrival == 40000);
}

TEST_CASE("unknown spot and overlap errors") {
    auto dir = testutil::temp_dir("events");
    auto bad_spot = testutil::write_file(dir / "bad_spot.csv",
                                         "date,spot_id,arrival_s,departure_s,max_duration_s\n"
                                         "2019-01-02,7,100,200,3600\n");
    CHECK_THROWS_AS(load_events(bad_spot, make_spots(2)), EventError);
    auto overlap = testutil::write_file(dir / "overlap.csv",
                                        "date,spot_id,arrival_s,departure_s,max_duration_s\n"
                                        "2019-01-02,0,100,500,3600\n"
                                        "2019-01-02,0,400,600,3600\n");
    try {
        load_events(overlap, make_spots(1));
        FAIL("expected overlap error");
    } catch (const EventError& e) {
        std::string msg = e.what();
        CHECK(msg.find("100") != std::string::npos);
        CHECK(msg.find("400") != std::string::npos);
    }
}

TEST_CASE("fuzzed file keeps per-spot non-overlap") {
    auto spots = make_spots(20);
    auto logs = generate_synthetic(spots, {.day_count = 5, .arrivals_per_spot_hour = 2.0,
                                           .mean_stay = 1200.0},
                                   99);
    auto dir = testutil::temp_dir("events");
    write_events(logs, (dir / "fuzz.csv").string());
    auto loaded = load_events((dir / "fuzz.csv").string(), spots);
    size_t total = 0;
    for (const auto& [_, log] : loaded) {
        CHECK(!has_overlap(log));
        total += log.events.size();
    }
    CHECK(total > 1000);
}

TEST_CASE("split_days counts for 2019") {
    std::vector<std::string> days;
    for (int d = 1; d <= 365; ++d) days.push_back(iso_date(2019, d));
    auto split = split_days(days);
    // remainder-enumeration oracle
    int test_n = 0, val_n = 0, train_n = 0;
    for (int d = 1; d <= 365; ++d) {
        if (d % 13 == 0) ++test_n;
        else if (d % 13 == 1) ++val_n;
        else ++train_n;
    }
    CHECK(test_n == 28);
    CHECK(val_n == 29);
    CHECK(train_n == 308);
    CHECK(split.test.size() == 28);
    CHECK(split.validation.size() == 29);
    CHECK(split.train.size() == 308);
}

TEST_CASE("split_days remainder arithmetic and purity") {
    CHECK(day_of_year("2019-01-13") == 13);
    auto s = split_days({iso_date(2019, 13), iso_date(2019, 14), iso_date(2019, 15)});
    CHECK(s.test == std::vector<std::string>{"2019-01-13"});
    CHECK(s.validation == std::vector<std::string>{"2019-01-14"});
    CHECK(s.train == std::vector<std::string>{"2019-01-15"});

    auto empty = split_days({});
    CHECK(empty.train.empty());
    CHECK(empty.validation.empty());
    CHECK(empty.test.empty());

    // permutation invariance
    std::vector<std::string> days;
    for (int d = 1; d <= 100; ++d) days.push_back(iso_date(2019, d));
    auto a = split_days(days);
    std::mt19937_64 rng(1);
    std::shuffle(days.begin(), days.end(), rng);
    auto b = split_days(days);
    CHECK(a.train == b.train);
    CHECK(a.validation == b.validation);
    CHECK(a.test == b.test);
}

TEST_CASE("leap year split") {
    CHECK(days_in_year(2020) == 366);
    std::vector<std::string> days;
    for (int d = 1; d <= 366; ++d) days.push_back(iso_date(2020, d));
    auto split = split_days(days);
    CHECK(split.test.size() == 28);
    CHECK(split.validation.size() == 29);
    CHECK(split.train.size() == 309);
}

TEST_CASE("synthetic generator determinism and limits") {
    auto spots = make_spots(5);
    SyntheticParams p{.day_count = 3, .arrivals_per_spot_hour = 1.0, .mean_stay = 900.0};
    auto a = generate_synthetic(spots, p, 4);
    auto b = generate_synthetic(spots, p, 4);
    REQUIRE(a.size() == b.size());
    for (const auto& [day, log] : a) {
        const EventLog& other = b.at(day);
        REQUIRE(log.events.size() == other.events.size());
        for (size_t i = 0; i < log.events.size(); ++i) {
            CHECK(log.events[i].spot == other.events[i].spot);
            CHECK(log.events[i].arrival == other.events[i].arrival);
            CHECK(log.events[i].departure == other.events[i].departure);
        }
    }

    SyntheticParams zero{.day_count = 2, .arrivals_per_spot_hour = 0.0};
    auto none = generate_synthetic(spots, zero, 4);
    for (const auto& [_, log] : none) CHECK(log.events.empty());
}

TEST_CASE("synthetic stay durations match the requested mean") {
    auto spots = make_spots(50);
    SyntheticParams p{.day_count = 60, .arrivals_per_spot_hour = 0.5, .mean_stay = 3600.0,
                      .allowed_menu = {1e9}}; // huge allowance: departures are never clipped early
    auto logs = generate_synthetic(spots, p, 123);
    double sum = 0.0;
    int n = 0;
    for (const auto& [_, log] : logs)
        for (const ParkingEvent& e : log.events) {
            // keep >= 10 mean-lengths of headroom so midnight clipping is
            // negligible and does not bias the sample
            if (e.arrival > kSecondsPerDay - 10.0 * 3600.0) continue;
            sum += e.departure - e.arrival;
            ++n;
        }
    REQUIRE(n > 10000);
    CHECK(sum / n == doctest::Approx(3600.0).epsilon(0.02));
}

TEST_CASE("timeline replay matches interval evaluation at random probes") {
    auto spots = make_spots(10);
    auto logs = generate_synthetic(spots, {.day_count = 1, .arrivals_per_spot_hour = 1.5,
                                           .mean_stay = 2500.0, .allowed_menu = {600, 1800}},
                                   31);
    const EventLog& log = logs.begin()->second;
    auto tl = event_timeline(log);
    // monotone in time
    for (size_t i = 1; i < tl.size(); ++i) CHECK(tl[i].time >= tl[i - 1].time);

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> probe(0.0, kSecondsPerDay);
    for (int trial = 0; trial < 1000; ++trial) {
        double t = probe(rng);
        // replay: last change per spot at or before t
        std::vector<int> status(spots.size(), 0);
        for (const TimelineEntry& e : tl) {
            if (e.time > t) break;
            status[e.spot] = e.change == StatusChange::Free ? 0
                             : e.change == StatusChange::Occupied ? 1 : 2;
        }
        for (int p = 0; p < 10; ++p) CHECK(status[p] == status_at(log, p, t));
    }
}

TEST_CASE("per-spot status cycles occupied -> (violation ->)? free") {
    auto spots = make_spots(8);
    auto logs = generate_synthetic(spots, {.day_count = 2, .arrivals_per_spot_hour = 1.0,
                                           .mean_stay = 2000.0, .allowed_menu = {900}},
                                   77);
    for (const auto& [_, log] : logs) {
        std::map<int, int> state; // 0 free, 1 occupied, 2 violation
        for (const TimelineEntry& e : event_timeline(log)) {
            int& s = state[e.spot];
            switch (e.change) {
                case StatusChange::Occupied: CHECK(s == 0); s = 1; break;
                case StatusChange::InViolation: CHECK(s == 1); s = 2; break;
                case StatusChange::Free: CHECK(s != 0); s = 0; break;
            }
        }
    }
}

TEST_CASE("events crossing midnight are clipped") {
    auto dir = testutil::temp_dir("events");
    auto path = testutil::write_file(dir / "clip.csv",
                                     "date,spot_id,arrival_s,departure_s,max_duration_s\n"
                                     "2019-05-06,0,80000,90000,3600\n");
    auto logs = load_events(path, make_spots(1));
    CHECK(logs.at("2019-05-06").events[0].departure == kSecondsPerDay);
}
