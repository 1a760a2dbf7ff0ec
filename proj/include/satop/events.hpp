#pragma once

// Parking event data model: CSV ingestion, synthetic generation, the
// day-of-year mod 13 dataset split, and per-day status timelines.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "satop/roadnet.hpp"

namespace satop {

class EventError : public std::runtime_error {
public:
    explicit EventError(const std::string& msg) : std::runtime_error(msg) {}
};

constexpr double kSecondsPerDay = 86400.0;

struct ParkingEvent {
    int spot;
    double arrival;      // seconds of day
    double departure;    // seconds of day, > arrival
    double max_duration; // allowed parking time for this event
};

struct EventLog {
    std::string day; // ISO date
    std::vector<ParkingEvent> events; // sorted by (arrival, spot)
};

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;
};

// ISO date -> day of year (Jan 1 = 1), proleptic Gregorian.
inline int day_of_year(const std::string& iso_date) {
    int y, m, d;
    if (std::sscanf(iso_date.c_str(), "%d-%d-%d", &y, &m, &d) != 3)
        throw EventError("malformed date '" + iso_date + "' (expected YYYY-MM-DD)");
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(m)},
                                    std::chrono::day{unsigned(d)}};
    if (!ymd.ok()) throw EventError("invalid calendar date '" + iso_date + "'");
    auto jan1 = std::chrono::year_month_day{std::chrono::year{y}, std::chrono::January,
                                            std::chrono::day{1}};
    return (std::chrono::sys_days{ymd} - std::chrono::sys_days{jan1}).count() + 1;
}

inline int days_in_year(int year) {
    return std::chrono::year{year}.is_leap() ? 366 : 365;
}

inline std::string iso_date(int year, int doy) {
    auto d = std::chrono::sys_days{std::chrono::year{year} / std::chrono::January /
                                   std::chrono::day{1}} + std::chrono::days{doy - 1};
    std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", int(ymd.year()), unsigned(ymd.month()),
                  unsigned(ymd.day()));
    return buf;
}

// remainder 0 -> test, 1 -> validation, else train
inline DatasetSplit split_days(const std::vector<std::string>& days) {
    DatasetSplit s;
    for (const std::string& day : days) {
        switch (day_of_year(day) % 13) {
            case 0: s.test.push_back(day); break;
            case 1: s.validation.push_back(day); break;
            default: s.train.push_back(day); break;
        }
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.validation.begin(), s.validation.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

namespace detail {

inline void sort_and_validate(EventLog& log) {
    std::sort(log.events.begin(), log.events.end(), [](const ParkingEvent& a, const ParkingEvent& b) {
        if (a.arrival != b.arrival) return a.arrival < b.arrival;
        return a.spot < b.spot;
    });
    std::map<int, const ParkingEvent*> last_by_spot;
    for (const ParkingEvent& e : log.events) {
        auto it = last_by_spot.find(e.spot);
        if (it != last_by_spot.end() && e.arrival < it->second->departure)
            throw EventError("day " + log.day + ": overlapping events for spot " +
                             std::to_string(e.spot) + ": [" + std::to_string(it->second->arrival) +
                             "," + std::to_string(it->second->departure) + ") and [" +
                             std::to_string(e.arrival) + "," + std::to_string(e.departure) + ")");
        last_by_spot[e.spot] = &e;
    }
}

} // namespace detail

// Event CSV: date,spot_id,arrival_s,departure_s,max_duration_s (header required).
// Events crossing midnight are clipped to the day boundary.
inline std::map<std::string, EventLog> load_events(const std::string& path,
                                                   const std::vector<ParkingSpot>& spots) {
    std::ifstream in(path);
    if (!in) throw EventError("cannot open event file: " + path);
    std::map<std::string, EventLog> logs;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header_seen) { header_seen = true; continue; }
        auto f = detail::split_csv(line);
        if (f.size() != 5)
            throw EventError("line " + std::to_string(line_no) +
                             ": expected date,spot_id,arrival_s,departure_s,max_duration_s");
        ParkingEvent e{};
        e.spot = detail::parse_int(f[1], "spot id", line_no);
        e.arrival = detail::parse_num(f[2], "arrival", line_no);
        e.departure = detail::parse_num(f[3], "departure", line_no);
        e.max_duration = detail::parse_num(f[4], "max duration", line_no);
        if (e.spot < 0 || e.spot >= static_cast<int>(spots.size()))
            throw EventError("line " + std::to_string(line_no) + ": unknown spot id " +
                             std::to_string(e.spot));
        e.arrival = std::max(0.0, e.arrival);
        e.departure = std::min(kSecondsPerDay, e.departure);
        if (!(e.arrival < e.departure))
            throw EventError("line " + std::to_string(line_no) + ": arrival must precede departure");
        if (!(e.max_duration > 0.0))
            throw EventError("line " + std::to_string(line_no) + ": max duration must be > 0");
        day_of_year(f[0]); // validates the date
        EventLog& log = logs[f[0]];
        log.day = f[0];
        log.events.push_back(e);
    }
    for (auto& [_, log] : logs) detail::sort_and_validate(log);
    return logs;
}

struct SyntheticParams {
    int day_count = 10;
    double arrivals_per_spot_hour = 0.5;
    double mean_stay = 3600.0; // exponential stay, seconds
    std::vector<double> allowed_menu = {1800.0, 3600.0, 7200.0};
    int start_year = 2019;
    int start_doy = 1;
};

// Poisson arrivals per spot, thinned to enforce per-spot non-overlap;
// deterministic per seed.
inline std::map<std::string, EventLog> generate_synthetic(const std::vector<ParkingSpot>& spots,
                                                          const SyntheticParams& p, uint64_t seed) {
    if (!(p.arrivals_per_spot_hour >= 0.0)) throw EventError("arrival rate must be >= 0");
    if (p.allowed_menu.empty()) throw EventError("allowed-duration menu must be non-empty");
    std::map<std::string, EventLog> logs;
    std::mt19937_64 rng(seed);
    const double rate_per_sec = p.arrivals_per_spot_hour / 3600.0;
    for (int d = 0; d < p.day_count; ++d) {
        std::string day = iso_date(p.start_year, p.start_doy + d);
        EventLog log;
        log.day = day;
        if (rate_per_sec > 0.0) {
            std::exponential_distribution<double> gap(rate_per_sec);
            std::exponential_distribution<double> stay(1.0 / p.mean_stay);
            std::uniform_int_distribution<size_t> menu(0, p.allowed_menu.size() - 1);
            for (const ParkingSpot& s : spots) {
                double t = gap(rng);
                double busy_until = 0.0;
                while (t < kSecondsPerDay) {
                    double dur = stay(rng);
                    double allowed = p.allowed_menu[menu(rng)];
                    if (t >= busy_until) {
                        double dep = std::min(t + dur, kSecondsPerDay);
                        if (dep > t) log.events.push_back({s.id, t, dep, allowed});
                        busy_until = t + dur;
                    }
                    t += gap(rng);
                }
            }
        }
        detail::sort_and_validate(log);
        logs.emplace(day, std::move(log));
    }
    return logs;
}

// ---------------------------------------------------------------------------
// status timeline

enum class StatusChange { Occupied, InViolation, Free };

struct TimelineEntry {
    double time;
    int spot;
    StatusChange change;
    int event_index; // into EventLog::events
};

// For each event emits occupied@arrival, in-violation@(arrival+max_duration)
// when the departure exceeds it, free@departure. Globally time-sorted, stable
// for simultaneous changes (by spot id, then phase order).
inline std::vector<TimelineEntry> event_timeline(const EventLog& log) {
    std::vector<TimelineEntry> tl;
    for (size_t i = 0; i < log.events.size(); ++i) {
        const ParkingEvent& e = log.events[i];
        tl.push_back({e.arrival, e.spot, StatusChange::Occupied, static_cast<int>(i)});
        double onset = e.arrival + e.max_duration;
        if (e.departure > onset)
            tl.push_back({onset, e.spot, StatusChange::InViolation, static_cast<int>(i)});
        tl.push_back({e.departure, e.spot, StatusChange::Free, static_cast<int>(i)});
    }
    std::sort(tl.begin(), tl.end(), [](const TimelineEntry& a, const TimelineEntry& b) {
        if (a.time != b.time) return a.time < b.time;
        if (a.spot != b.spot) return a.spot < b.spot;
        // back-to-back events on one spot: the earlier event's free applies
        // before the next arrival
        if (a.event_index != b.event_index) return a.event_index < b.event_index;
        return static_cast<int>(a.change) < static_cast<int>(b.change);
    });
    return tl;
}

inline void write_events(const std::map<std::string, EventLog>& logs, const std::string& path) {
    std::ofstream out(path);
    out << "date,spot_id,arrival_s,departure_s,max_duration_s\n";
    for (const auto& [day, log] : logs)
        for (const ParkingEvent& e : log.events)
            out << day << "," << e.spot << "," << e.arrival << "," << e.departure << ","
                << e.max_duration << "\n";
}

} // namespace satop
