// Spatial model of the radio environment kept by the twin: one grid per
// (AP, channel) pair, each cell holding a recency-weighted FDR estimate.
#pragma once

#include <witwin/core.hpp>
#include <witwin/environment.hpp>
#include <witwin/feature.hpp>

#include <spdlog/spdlog.h>

#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace witwin
{

struct CellIndex
{
    std::size_t ix = 0; // column, along x
    std::size_t iy = 0; // row, along y

    bool operator==(const CellIndex&) const = default;
};

struct CellEstimate
{
    double value = 0.0;
    double weight = 0.0; // effective number of samples behind value
    double last_update = 0.0;
    std::uint64_t sample_count = 0;
};

struct TwinParams
{
    double cell_size = 2.0;
    double prior_fdr = 0.5;
    double decay_alpha = 0.1;
    std::uint64_t min_samples = 3;
};

// Text dump of one grid. Row 0 is the row at origin_y.
struct HeatmapDump
{
    std::size_t rows = 0;
    std::size_t cols = 0;
    double cell_size = 0.0;
    double origin_x = 0.0;
    double origin_y = 0.0;
    std::vector<std::optional<double>> values; // row-major

    bool operator==(const HeatmapDump&) const = default;
};

enum class IngestOutcome
{
    Applied,        // keyed by dst (STA -> AP report)
    AppliedReverse, // keyed by src (AP-side observation)
    Rejected,
};

class HeatmapModel
{
  public:
    HeatmapModel(BoundingBox box, TwinParams params) : box_(box), params_(params)
    {
        if (!(params_.cell_size > 0.0))
            throw ConfigError("twin cell_size must be positive");
        if (!(params_.decay_alpha > 0.0 && params_.decay_alpha <= 1.0))
            throw ConfigError("twin decay_alpha must be in (0,1]");
        if (params_.min_samples < 1)
            throw ConfigError("twin min_samples must be >= 1");
        if (params_.prior_fdr < 0.0 || params_.prior_fdr > 1.0)
            throw ConfigError("twin prior_fdr must be in [0,1]");
        if (!(box_.max_x > box_.min_x && box_.max_y > box_.min_y))
            throw ConfigError("twin bounding box is empty");
        cols_ = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil((box_.max_x - box_.min_x) / params_.cell_size)));
        rows_ = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil((box_.max_y - box_.min_y) / params_.cell_size)));
    }

    // Creates an empty grid for each channel of the AP.
    void declare(const ApConfig& ap)
    {
        for (const ChannelId& c : ap.channels)
            grids_.try_emplace(Key{ap.id.str(), c}, rows_ * cols_);
    }

    bool knows(const std::string& ap_id, const ChannelId& c) const
    {
        return grids_.count(Key{ap_id, c}) != 0;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    const TwinParams& params() const { return params_; }
    const BoundingBox& bounds() const { return box_; }
    std::uint64_t rejected() const { return rejected_; }

    // Half-open cells [k*s, (k+1)*s); positions outside the box land in the border cell.
    CellIndex cell_of(const Position& pos) const
    {
        auto axis = [this](double v, double lo, std::size_t n) {
            const double k = std::floor((v - lo) / params_.cell_size);
            if (!(k >= 0.0))
                return std::size_t{0};
            return std::min(static_cast<std::size_t>(k), n - 1);
        };
        return {axis(pos.x, box_.min_x, cols_), axis(pos.y, box_.min_y, rows_)};
    }

    Position cell_center(CellIndex c) const
    {
        return {box_.min_x + (static_cast<double>(c.ix) + 0.5) * params_.cell_size,
                box_.min_y + (static_cast<double>(c.iy) + 0.5) * params_.cell_size};
    }

    // Folds one sample into the cell under its position. Reports from a STA
    // are keyed by dst, observations made by an AP by src; both directions
    // train the same grid.
    IngestOutcome ingest(const FeatureSample& sample)
    {
        IngestOutcome outcome = IngestOutcome::Applied;
        auto it = grids_.find(Key{sample.dst, sample.channel});
        if (it == grids_.end())
        {
            it = grids_.find(Key{sample.src, sample.channel});
            outcome = IngestOutcome::AppliedReverse;
        }
        if (it == grids_.end())
        {
            ++rejected_;
            spdlog::warn("twin: rejected sample {} for unknown AP/channel", sample.tag());
            return IngestOutcome::Rejected;
        }

        CellEstimate& cell = it->second[flat(cell_of(sample.pos))];
        const double alpha = params_.decay_alpha;
        if (cell.sample_count == 0)
        {
            cell.value = sample.fdr_observed;
            cell.weight = 1.0;
        }
        else
        {
            cell.value += alpha * (sample.fdr_observed - cell.value);
            cell.weight = (1.0 - alpha) * cell.weight + 1.0;
        }
        cell.value = std::clamp(cell.value, 0.0, 1.0);
        cell.last_update = sample.t;
        ++cell.sample_count;
        return outcome;
    }

    // The estimator h^(x, y, ap, c). Fallback chain: own cell, then the
    // nearest populated cell (ties: lower row, then lower column), then the prior.
    // Forecasting ahead in time is left to the caller, which queries at an
    // extrapolated position instead.
    double estimate(const Position& pos, const std::string& ap_id, const ChannelId& c) const
    {
        const std::vector<CellEstimate>& grid = grid_for(ap_id, c);
        const CellIndex own = cell_of(pos);
        if (populated(grid[flat(own)]))
            return grid[flat(own)].value;

        std::optional<std::size_t> best;
        long long best_d2 = std::numeric_limits<long long>::max();
        for (std::size_t iy = 0; iy < rows_; ++iy)
        {
            for (std::size_t ix = 0; ix < cols_; ++ix)
            {
                const std::size_t i = iy * cols_ + ix;
                if (!populated(grid[i]))
                    continue;
                const long long dx = static_cast<long long>(ix) - static_cast<long long>(own.ix);
                const long long dy = static_cast<long long>(iy) - static_cast<long long>(own.iy);
                const long long d2 = dx * dx + dy * dy;
                if (d2 < best_d2)
                {
                    best_d2 = d2;
                    best = i;
                }
            }
        }
        return best ? grid[*best].value : params_.prior_fdr;
    }

    // One estimate per configured channel, in the AP's channel order.
    std::vector<double> estimate_tuple(const Position& pos, const ApConfig& ap) const
    {
        std::vector<double> out;
        out.reserve(ap.channels.size());
        for (const ChannelId& c : ap.channels)
            out.push_back(estimate(pos, ap.id.str(), c));
        return out;
    }

    const CellEstimate& cell(const std::string& ap_id, const ChannelId& c, CellIndex idx) const
    {
        return grid_for(ap_id, c).at(flat(idx));
    }

    HeatmapDump export_heatmap(const std::string& ap_id, const ChannelId& c) const
    {
        const std::vector<CellEstimate>& grid = grid_for(ap_id, c);
        HeatmapDump dump{rows_, cols_, params_.cell_size, box_.min_x, box_.min_y, {}};
        dump.values.reserve(grid.size());
        for (const CellEstimate& cell : grid)
        {
            if (cell.sample_count == 0)
                dump.values.emplace_back(std::nullopt);
            else
                dump.values.emplace_back(cell.value);
        }
        return dump;
    }

    // Every declared (AP id, channel) pair, sorted.
    std::vector<std::pair<std::string, ChannelId>> grid_keys() const
    {
        std::vector<std::pair<std::string, ChannelId>> keys;
        for (const auto& [k, g] : grids_)
            keys.push_back(k);
        return keys;
    }

  private:
    using Key = std::pair<std::string, ChannelId>;

    bool populated(const CellEstimate& c) const { return c.sample_count >= params_.min_samples; }

    std::size_t flat(CellIndex c) const { return c.iy * cols_ + c.ix; }

    const std::vector<CellEstimate>& grid_for(const std::string& ap_id, const ChannelId& c) const
    {
        auto it = grids_.find(Key{ap_id, c});
        if (it == grids_.end())
            throw DomainError("twin: no grid for AP " + ap_id + " on " + c.to_string());
        return it->second;
    }

    BoundingBox box_;
    TwinParams params_;
    std::size_t rows_ = 1;
    std::size_t cols_ = 1;
    std::map<Key, std::vector<CellEstimate>> grids_;
    std::uint64_t rejected_ = 0;
};

// "rows cols cell_size origin_x origin_y", then one line per row, "-" for empty cells.
inline void write_heatmap(std::ostream& os, const HeatmapDump& dump)
{
    std::string line;
    line += std::to_string(dump.rows) + ' ' + std::to_string(dump.cols) + ' ';
    detail::append_double(line, dump.cell_size);
    line += ' ';
    detail::append_double(line, dump.origin_x);
    line += ' ';
    detail::append_double(line, dump.origin_y);
    os << line << '\n';
    for (std::size_t r = 0; r < dump.rows; ++r)
    {
        line.clear();
        for (std::size_t c = 0; c < dump.cols; ++c)
        {
            if (c > 0)
                line += ' ';
            const auto& v = dump.values[r * dump.cols + c];
            if (v)
                detail::append_double(line, *v);
            else
                line += '-';
        }
        os << line << '\n';
    }
}

inline HeatmapDump read_heatmap(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line))
        throw ParseError("heatmap: missing header");
    const auto head = detail::split(line, ' ');
    if (head.size() != 5)
        throw ParseError("heatmap: header needs 5 fields");
    HeatmapDump dump;
    dump.rows = static_cast<std::size_t>(detail::parse_int_field(head[0], "rows"));
    dump.cols = static_cast<std::size_t>(detail::parse_int_field(head[1], "cols"));
    dump.cell_size = detail::parse_double_field(head[2], "cell_size");
    dump.origin_x = detail::parse_double_field(head[3], "origin_x");
    dump.origin_y = detail::parse_double_field(head[4], "origin_y");
    for (std::size_t r = 0; r < dump.rows; ++r)
    {
        if (!std::getline(is, line))
            throw ParseError("heatmap: missing row " + std::to_string(r));
        const auto cells = detail::split(line, ' ');
        if (cells.size() != dump.cols)
            throw ParseError("heatmap: row " + std::to_string(r) + " has wrong width");
        for (std::string_view cell : cells)
        {
            if (cell == "-")
                dump.values.emplace_back(std::nullopt);
            else
                dump.values.emplace_back(detail::parse_double_field(cell, "cell"));
        }
    }
    return dump;
}

} // namespace witwin
