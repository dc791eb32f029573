#pragma once

/**
 * Long-short portfolio engine.
 *
 * Signals dated t are joined with each firm's simple close-to-close return
 * on the next trading date after t (the trading calendar is the set of
 * dates present in the returns panel). Per formation date the H/L/U legs
 * are equal-weighted means of member returns; H-L exists only on dates
 * where both legs have members and is defined as r_H - r_L. Annualization
 * uses 252 trading days: mean x 252 x 100, sample SD x sqrt(252) x 100,
 * Sharpe = annualized mean / annualized SD (zero risk-free rate), with a
 * 95% interval from the asymptotic Sharpe standard error
 * sqrt((1 + SR_daily^2 / 2) / n) scaled by sqrt(252).
 */

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "chronoeval/dates.hpp"
#include "chronoeval/errors.hpp"
#include "chronoeval/io.hpp"
#include "chronoeval/signal_pipeline.hpp"

namespace chronoeval::portfolio {

using json = nlohmann::json;
using signals::Signal;
using signals::SignalRecord;

struct ReturnRow {
    std::string date;
    std::string firm_id;
    double ret = 0.0;
};

struct ReturnsPanel {
    std::vector<ReturnRow> rows;

    static ReturnsPanel from_csv(const std::filesystem::path& path) {
        std::istringstream in(io::read_file(path));
        std::string line;
        if (!std::getline(in, line)) throw Error("empty returns file");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line != "date,firm_id,ret") {
            throw Error("returns file must start with 'date,firm_id,ret'");
        }
        ReturnsPanel panel;
        std::set<std::pair<std::string, std::string>> seen;
        std::size_t lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            const auto c1 = line.find(',');
            const auto c2 = line.find(',', c1 + 1);
            if (c1 == std::string::npos || c2 == std::string::npos) {
                throw Error("bad returns row at line " +
                            std::to_string(lineno));
            }
            ReturnRow row;
            row.date = line.substr(0, c1);
            row.firm_id = line.substr(c1 + 1, c2 - c1 - 1);
            row.ret = std::stod(line.substr(c2 + 1));
            dates::require_iso_date(row.date);
            if (row.ret <= -1.0) {
                throw Error("return <= -100% at line " +
                            std::to_string(lineno));
            }
            if (!seen.emplace(row.date, row.firm_id).second) {
                throw DuplicateKey("duplicate return for " + row.date + "/" +
                                   row.firm_id);
            }
            panel.rows.push_back(std::move(row));
        }
        return panel;
    }

    std::vector<std::string> trading_calendar() const {
        std::set<std::string> s;
        for (const auto& r : rows) s.insert(r.date);
        return {s.begin(), s.end()};
    }
};

struct JoinedRow {
    std::string signal_date;
    std::string firm_id;
    Signal signal = Signal::U;
    std::string return_date; // strictly after signal_date
    double ret = 0.0;
};

struct JoinCoverage {
    std::size_t joined = 0;
    std::size_t dropped_no_next_trading_day = 0;
    std::size_t dropped_missing_return = 0;

    std::size_t dropped() const {
        return dropped_no_next_trading_day + dropped_missing_return;
    }

    json to_json() const {
        return {{"joined", joined},
                {"dropped_no_next_trading_day", dropped_no_next_trading_day},
                {"dropped_missing_return", dropped_missing_return}};
    }
};

struct JoinResult {
    std::vector<JoinedRow> rows;
    JoinCoverage coverage;
};

inline JoinResult join_signals_returns(const std::vector<SignalRecord>& sigs,
                                       const ReturnsPanel& panel) {
    const auto calendar = panel.trading_calendar();
    std::map<std::pair<std::string, std::string>, double> by_key;
    for (const auto& r : panel.rows) by_key[{r.date, r.firm_id}] = r.ret;

    JoinResult out;
    for (const auto& s : sigs) {
        dates::require_iso_date(s.date);
        const auto next = std::upper_bound(calendar.begin(), calendar.end(),
                                           s.date);
        if (next == calendar.end()) {
            ++out.coverage.dropped_no_next_trading_day;
            continue;
        }
        const auto it = by_key.find({*next, s.firm_id});
        if (it == by_key.end()) {
            ++out.coverage.dropped_missing_return;
            continue;
        }
        out.rows.push_back({s.date, s.firm_id, s.signal, *next, it->second});
    }
    out.coverage.joined = out.rows.size();
    if (out.rows.empty()) {
        throw EmptyJoin("no signal matched a next-day return");
    }
    return out;
}

struct DailyPortfolioRow {
    std::string date; // formation date
    std::optional<double> r_h, r_l, r_u, r_hl;
    std::size_t n_h = 0, n_l = 0, n_u = 0;
};

inline std::vector<DailyPortfolioRow>
form_daily_portfolios(const std::vector<JoinedRow>& rows) {
    if (rows.empty()) throw EmptyJoin("no joined rows to form portfolios");
    struct Acc {
        double sum[3] = {0, 0, 0};
        std::size_t n[3] = {0, 0, 0};
    };
    std::map<std::string, Acc> by_date;
    for (const auto& r : rows) {
        auto& acc = by_date[r.signal_date];
        const int leg = static_cast<int>(r.signal);
        acc.sum[leg] += r.ret;
        acc.n[leg] += 1;
    }
    std::vector<DailyPortfolioRow> out;
    for (const auto& [date, acc] : by_date) {
        DailyPortfolioRow row;
        row.date = date;
        row.n_h = acc.n[0];
        row.n_l = acc.n[1];
        row.n_u = acc.n[2];
        if (acc.n[0]) row.r_h = acc.sum[0] / static_cast<double>(acc.n[0]);
        if (acc.n[1]) row.r_l = acc.sum[1] / static_cast<double>(acc.n[1]);
        if (acc.n[2]) row.r_u = acc.sum[2] / static_cast<double>(acc.n[2]);
        if (row.r_h && row.r_l) row.r_hl = *row.r_h - *row.r_l;
        out.push_back(std::move(row));
    }
    return out;
}

struct PortfolioStats {
    double mean_ann = 0.0; // percent
    double sd_ann = 0.0;   // percent
    double sharpe = 0.0;
    double ci95_low = 0.0;
    double ci95_high = 0.0;
    std::size_t n_days = 0;

    json to_json() const {
        return {{"mean_ann", mean_ann},   {"sd_ann", sd_ann},
                {"sharpe", sharpe},       {"ci95_low", ci95_low},
                {"ci95_high", ci95_high}, {"n_days", n_days}};
    }
};

inline double sharpe_from_annualized(double mean_ann, double sd_ann) {
    if (sd_ann <= 0.0) throw DegenerateSeries("non-positive annualized SD");
    return mean_ann / sd_ann;
}

inline PortfolioStats annualize(const std::vector<double>& daily) {
    const std::size_t n = daily.size();
    if (n < 2) throw DegenerateSeries("need at least 2 daily returns");
    double mean = 0.0;
    for (double x : daily) mean += x;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : daily) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0) throw DegenerateSeries("zero daily standard deviation");

    PortfolioStats st;
    st.n_days = n;
    st.mean_ann = mean * 252.0 * 100.0;
    st.sd_ann = sd * std::sqrt(252.0) * 100.0;
    st.sharpe = st.mean_ann / st.sd_ann;
    const double sr_daily = mean / sd;
    const double se = std::sqrt((1.0 + 0.5 * sr_daily * sr_daily) /
                                static_cast<double>(n)) *
                      std::sqrt(252.0);
    st.ci95_low = st.sharpe - 1.96 * se;
    st.ci95_high = st.sharpe + 1.96 * se;
    return st;
}

// Conservative leakage-free lower bound: the consistent model's Sharpe over
// the strongest comparison model's.
inline double lower_bound_ratio(double sr_consistent,
                                const std::vector<double>& sr_comparisons) {
    if (sr_comparisons.empty()) {
        throw NonPositiveComparison("no comparison Sharpe ratios");
    }
    double best = sr_comparisons.front();
    for (double s : sr_comparisons) {
        if (s <= 0.0) {
            throw NonPositiveComparison("comparison Sharpe must be positive");
        }
        best = std::max(best, s);
    }
    return sr_consistent / best;
}

struct BacktestResult {
    std::vector<DailyPortfolioRow> daily;
    std::map<std::string, PortfolioStats> legs; // "H","L","U","HL" when defined
    std::map<std::string, std::size_t> dates_excluded; // per leg
    JoinCoverage coverage;

    json to_json() const {
        json legs_j = json::object();
        for (const auto& [name, st] : legs) {
            legs_j[name] = st.to_json();
            legs_j[name]["dates_excluded"] = dates_excluded.at(name);
        }
        return {{"legs", legs_j},
                {"coverage", coverage.to_json()},
                {"formation_dates", daily.size()}};
    }
};

inline BacktestResult backtest(const std::vector<SignalRecord>& sigs,
                               const ReturnsPanel& panel) {
    auto joined = join_signals_returns(sigs, panel);
    BacktestResult out;
    out.coverage = joined.coverage;
    out.daily = form_daily_portfolios(joined.rows);

    std::map<std::string, std::vector<double>> series;
    for (const auto& row : out.daily) {
        if (row.r_h) series["H"].push_back(*row.r_h);
        if (row.r_l) series["L"].push_back(*row.r_l);
        if (row.r_u) series["U"].push_back(*row.r_u);
        if (row.r_hl) series["HL"].push_back(*row.r_hl);
    }
    for (const auto& [name, s] : series) {
        out.dates_excluded[name] = out.daily.size() - s.size();
        out.legs[name] = annualize(s);
    }
    return out;
}

inline std::string daily_series_csv(const std::vector<DailyPortfolioRow>& rows) {
    auto fmt = [](const std::optional<double>& v) {
        return v ? json(*v).dump() : std::string();
    };
    std::string out = "date,n_h,n_l,n_u,r_h,r_l,r_u,r_hl\n";
    for (const auto& r : rows) {
        out += r.date + ',' + std::to_string(r.n_h) + ',' +
               std::to_string(r.n_l) + ',' + std::to_string(r.n_u) + ',' +
               fmt(r.r_h) + ',' + fmt(r.r_l) + ',' + fmt(r.r_u) + ',' +
               fmt(r.r_hl) + '\n';
    }
    return out;
}

struct SweepEntry {
    std::string vintage; // a year, or "realtime"
    PortfolioStats stats;
};

struct SweepResult {
    std::vector<SweepEntry> entries; // vintages ascending, realtime last

    json to_json() const {
        json arr = json::array();
        for (const auto& e : entries) {
            json j = e.stats.to_json();
            j["vintage"] = e.vintage;
            arr.push_back(j);
        }
        return arr;
    }

    std::string to_csv() const {
        std::string out = "vintage,sharpe,ci_low,ci_high\n";
        for (const auto& e : entries) {
            out += e.vintage + ',' + json(e.stats.sharpe).dump() + ',' +
                   json(e.stats.ci95_low).dump() + ',' +
                   json(e.stats.ci95_high).dump() + '\n';
        }
        return out;
    }
};

// Per-vintage H-L statistics plus the realtime composite that, for each
// prediction year, takes the signals of the previous year's vintage.
inline SweepResult
vintage_sweep(const std::map<int, std::vector<SignalRecord>>& per_vintage,
              const ReturnsPanel& panel) {
    if (per_vintage.empty()) throw Error("no vintage signal files");
    SweepResult out;
    std::set<int> prediction_years;
    for (const auto& [year, sigs] : per_vintage) {
        const auto bt = backtest(sigs, panel);
        const auto it = bt.legs.find("HL");
        if (it == bt.legs.end()) {
            throw DegenerateSeries("vintage " + std::to_string(year) +
                                   " has no long-short series");
        }
        out.entries.push_back({std::to_string(year), it->second});
        for (const auto& s : sigs) prediction_years.insert(dates::year_of(s.date));
    }
    std::vector<SignalRecord> realtime;
    for (int year : prediction_years) {
        const auto it = per_vintage.find(year - 1);
        if (it == per_vintage.end()) {
            throw MissingVintage("realtime stitching needs vintage " +
                                 std::to_string(year - 1) +
                                 " for prediction year " +
                                 std::to_string(year));
        }
        for (const auto& s : it->second) {
            if (dates::year_of(s.date) == year) realtime.push_back(s);
        }
    }
    const auto bt = backtest(realtime, panel);
    out.entries.push_back({"realtime", bt.legs.at("HL")});
    return out;
}

}  // namespace chronoeval::portfolio
