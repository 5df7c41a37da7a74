"""
Campaign statistics over CMC record logs: per-location algorithm shares, location-weighted
provider means, two-hour usage profiles and the duration / count summary table.

Shares are averaged, never counts: every measured location weighs 1/n for its provider, and a
location without any A5/x record (EmptyCell) is left out of n rather than counted as zero.
"""
import os
import re
import json
import pandas as pd
from dataclasses import dataclass, field
from utils.errors import EmptyCell, NoData, SinkWriteError
from utils.records import RECORD_KEYS, load_record_frame
from utils.um_parser import NO_CIPHERING_LABEL
from utils.logger import Logger

BASE_ALGOS = ("A5/1", "A5/3", "A5/4")
HOURS = 24
BUCKETS = 12
SECONDS_PER_DAY = 86400


def natural_key(label):
    """'2/u' sorts before '10/r'."""
    return [(0, int(part), "") if part.isdigit() else (1, 0, part) for part in re.split(r"(\d+)", str(label)) if part]


def natural_sorted(labels):
    return sorted(labels, key=natural_key)


def bucket_label(bucket):
    return f"{2 * bucket:02d}-{2 * bucket + 1:02d}"


@dataclass
class CampaignDataset:
    """Immutable view of the records of one campaign, indexed by (provider, location)."""
    frame: pd.DataFrame
    timezone: str = "UTC"
    aggregates: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        frame = self.frame.copy()
        for column in ("algo", "location", "provider"):
            frame[column] = frame[column].astype(str)
        frame["ts"] = frame["ts"].astype(float)
        self.frame = frame.reset_index(drop=True)

    @classmethod
    def load(cls, paths, timezone="UTC"):
        frames = []
        for path in paths:
            loaded = load_record_frame(path)
            Logger.info(f"Loaded {len(loaded)} records from {path}")
            frames.append(loaded)
        frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=list(RECORD_KEYS))
        return cls(frame, timezone=timezone)

    def aggregate(self, key, compute):
        """Memoise a statistic of the (never mutated) frame."""
        if key not in self.aggregates:
            self.aggregates[key] = compute()
        return self.aggregates[key]

    def __len__(self):
        return len(self.frame)

    @property
    def providers(self):
        return list(self.aggregate("providers", lambda: sorted(self.frame["provider"].unique())))

    def locations(self, provider=None):
        def compute():
            frame = self.frame if provider is None else self.frame[self.frame["provider"] == provider]
            return natural_sorted(frame["location"].unique())
        return list(self.aggregate(("locations", provider), compute))

    def algo_columns(self, include_nociphering=False):
        """A5/1, A5/3, A5/4 always; other observed A5/n in ascending n; 'none' last when asked for."""
        observed = self.aggregate("algos", lambda: set(self.frame["algo"].unique()) - {NO_CIPHERING_LABEL})
        extra = sorted(observed - set(BASE_ALGOS), key=natural_key)
        columns = [*BASE_ALGOS, *extra]
        if include_nociphering:
            columns.append(NO_CIPHERING_LABEL)
        return columns

    def ciphered(self, include_nociphering=False):
        if include_nociphering:
            return self.frame
        return self.aggregate("ciphered", lambda: self.frame[self.frame["algo"] != NO_CIPHERING_LABEL])


@dataclass(frozen=True)
class LocationDistribution:
    provider: str
    location: str
    counts: dict
    shares: dict

    @property
    def total(self):
        return sum(self.counts.values())


@dataclass(frozen=True)
class ProviderSummary:
    provider: str
    shares: dict
    n_locations: int
    locations: list = field(default_factory=list)

    @property
    def weight(self):
        return 1 / self.n_locations


@dataclass(frozen=True)
class HourlyProfile:
    provider: str
    shares: pd.DataFrame  # index: bucket 0..11, columns: algorithm labels

    @property
    def mass(self):
        return float(self.shares.to_numpy().sum())


def count_matrix(ds, include_nociphering=False):
    """Record counts indexed by (provider, location), one column per algorithm label. Computed once per dataset."""
    def compute():
        columns = ds.algo_columns(include_nociphering)
        frame = ds.ciphered(include_nociphering)
        if frame.empty:
            index = pd.MultiIndex.from_tuples([], names=["provider", "location"])
            return pd.DataFrame(0, index=index, columns=columns)
        counts = frame.groupby(["provider", "location", "algo"]).size().unstack("algo", fill_value=0)
        return counts.reindex(columns=columns, fill_value=0)
    return ds.aggregate(("counts", include_nociphering), compute)


def _distribution(provider, location, row):
    total = int(row.sum())
    counts = {algo: int(count) for algo, count in row.items()}
    shares = {algo: count / total * 100 for algo, count in counts.items()}
    return LocationDistribution(provider=provider, location=location, counts=counts, shares=shares)


def location_distribution(ds, provider, location, include_nociphering=False):
    """
    Algorithm shares (percent) at one location for one provider.

    Raises:
        EmptyCell: no A5/x record for the pair (none records too when they are included).
    """
    counts = count_matrix(ds, include_nociphering)
    if (provider, location) not in counts.index:
        raise EmptyCell(f"No records for provider {provider} at location {location}")
    row = counts.loc[(provider, location)]
    if row.sum() == 0:
        raise EmptyCell(f"No records for provider {provider} at location {location}")
    return _distribution(provider, location, row)


def location_distributions(ds, provider, include_nociphering=False):
    """All non-empty distributions of one provider, locations in natural order."""
    counts = count_matrix(ds, include_nociphering)
    distributions = []
    for location in ds.locations(provider):
        if (provider, location) not in counts.index:
            continue
        row = counts.loc[(provider, location)]
        if row.sum() > 0:
            distributions.append(_distribution(provider, location, row))
    return distributions


def provider_mean(ds, provider, include_nociphering=False):
    """
    Equal-weight mean of the location shares of one provider.

    Raises:
        NoData: the provider has no measured location.
    """
    distributions = location_distributions(ds, provider, include_nociphering)
    if not distributions:
        raise NoData(f"No measured location for provider {provider}")

    n = len(distributions)
    columns = ds.algo_columns(include_nociphering)
    shares = {algo: sum(d.shares[algo] for d in distributions) / n for algo in columns}
    return ProviderSummary(provider=provider, shares=shares, n_locations=n,
                           locations=[d.location for d in distributions])


def _local_hours(ds, frame):
    stamps = pd.to_datetime(frame["ts"], unit="s", utc=True)
    if ds.timezone and ds.timezone.upper() != "UTC":
        stamps = stamps.dt.tz_convert(ds.timezone)
    return stamps.dt.hour


def hourly_profile(ds, provider, include_nociphering=False):
    """
    Share of each location's traffic per (hour, algorithm), averaged over the measured locations
    and summed into two-hour buckets. Locations with no traffic in an hour contribute zeros.

    Raises:
        NoData: the provider has no measured location.
    """
    columns = ds.algo_columns(include_nociphering)
    frame = ds.ciphered(include_nociphering)
    frame = frame[frame["provider"] == provider]
    if frame.empty:
        raise NoData(f"No measured location for provider {provider}")

    frame = frame.assign(hour=_local_hours(ds, frame).to_numpy())
    full_index = pd.MultiIndex.from_product([range(HOURS), columns], names=["hour", "algo"])

    per_location = []
    for location, rows in frame.groupby("location", sort=False):
        counts = rows.groupby(["hour", "algo"]).size().reindex(full_index, fill_value=0)
        per_location.append(counts / len(rows))

    mean = pd.concat(per_location, axis=1).mean(axis=1)
    hourly = mean.unstack("algo").reindex(index=range(HOURS), columns=columns, fill_value=0.0)
    buckets = hourly.groupby(hourly.index // 2).sum()
    buckets.index.name = "bucket"
    return HourlyProfile(provider=provider, shares=buckets)


def campaign_summary(ds):
    """
    Table of (location, provider, days, cmc_count) over every location x provider pair seen in
    the campaign. Counts include 'none' records; empty cells are days 0, count 0.
    """
    columns = ["location", "provider", "days", "cmc_count"]
    rows = []
    frame = ds.frame
    if frame.empty:
        return pd.DataFrame(columns=columns)

    stats = frame.groupby(["location", "provider"])["ts"].agg(["min", "max", "size"])
    for location in ds.locations():
        for provider in ds.providers:
            if (location, provider) in stats.index:
                cell = stats.loc[(location, provider)]
                days = round((float(cell["max"]) - float(cell["min"])) / SECONDS_PER_DAY, 2)
                rows.append((location, provider, days, int(cell["size"])))
            else:
                rows.append((location, provider, 0.0, 0))
    return pd.DataFrame(rows, columns=columns)


def summary_pivot(summary):
    """Location rows, one (Days, #CMCs) column pair per provider."""
    if summary.empty:
        return pd.DataFrame()
    pivot = summary.pivot(index="location", columns="provider", values=["days", "cmc_count"])
    providers = sorted(summary["provider"].unique())
    pivot = pivot.swaplevel(axis=1).reindex(columns=[(p, kind) for p in providers for kind in ("days", "cmc_count")])
    pivot = pivot.reindex(natural_sorted(pivot.index))
    pivot.columns = [f"{provider} {'Days' if kind == 'days' else '#CMCs'}" for provider, kind in pivot.columns]
    return pivot


def summary_text(summary):
    pivot = summary_pivot(summary)
    if pivot.empty:
        return "(no records)\n"
    formatters = {column: (lambda value: f"{value:.2f}") if column.endswith("Days") else (lambda value: f"{int(value)}")
                  for column in pivot.columns}
    return pivot.to_string(formatters=formatters) + "\n"


def provider_means_table(ds, include_nociphering=False):
    """Provider means (percent, 1 decimal) with the location weight, as aligned text."""
    rows = []
    columns = ds.algo_columns(include_nociphering)
    for provider in ds.providers:
        try:
            summary = provider_mean(ds, provider, include_nociphering)
        except NoData:
            continue
        rows.append({"provider": provider, **{algo: round(summary.shares[algo], 1) for algo in columns},
                     "locations": summary.n_locations, "weight": f"1/{summary.n_locations}"})
    if not rows:
        return "(no measured locations)\n"
    return pd.DataFrame(rows).set_index("provider").to_string(float_format=lambda value: f"{value:.1f}") + "\n"


def stripplot_frame(ds, include_nociphering=False):
    rows = []
    for provider in ds.providers:
        distributions = location_distributions(ds, provider, include_nociphering)
        for distribution in distributions:
            for algo, share in distribution.shares.items():
                rows.append((provider, "location", distribution.location, algo, share))
        if distributions:
            summary = provider_mean(ds, provider, include_nociphering)
            for algo, share in summary.shares.items():
                rows.append((provider, "mean", "", algo, share))
    return pd.DataFrame(rows, columns=["provider", "kind", "location", "algo", "share"])


def heatmap_frame(ds, include_nociphering=False):
    """Provider x location matrix of shares; EmptyCell pairs are kept as missing values."""
    columns = ds.algo_columns(include_nociphering)
    counts = count_matrix(ds, include_nociphering)
    rows = []
    for provider in ds.providers:
        for location in ds.locations():
            row = counts.loc[(provider, location)] if (provider, location) in counts.index else None
            if row is None or row.sum() == 0:
                rows.append((provider, location, *[None] * len(columns)))
            else:
                shares = _distribution(provider, location, row).shares
                rows.append((provider, location, *[shares[algo] for algo in columns]))
    return pd.DataFrame(rows, columns=["provider", "location", *columns])


def hourly_frame(ds, include_nociphering=False):
    rows = []
    for provider in ds.providers:
        try:
            profile = hourly_profile(ds, provider, include_nociphering)
        except NoData:
            continue
        for bucket in range(BUCKETS):
            for algo in profile.shares.columns:
                rows.append((provider, bucket, bucket_label(bucket), algo, float(profile.shares.loc[bucket, algo])))
    return pd.DataFrame(rows, columns=["provider", "bucket", "hours", "algo", "share"])


def _write_json(frame, path):
    records = frame.astype(object).where(frame.notna(), None).to_dict(orient="records")
    with open(path, "w", encoding="utf-8") as file:
        json.dump(records, file, indent=2)
        file.write("\n")


def export_figures(ds, out_dir, include_nociphering=False):
    """
    Write figure-ready data (stripplot, heatmap, hourly profile) as CSV + JSON and the summary
    table as CSV + aligned text. Returns the written paths.

    Raises:
        SinkWriteError: the output directory or a file cannot be written.
    """
    outputs = {
        "stripplot": stripplot_frame(ds, include_nociphering),
        "heatmap": heatmap_frame(ds, include_nociphering),
        "hourly_profile": hourly_frame(ds, include_nociphering),
    }
    summary = campaign_summary(ds)
    written = []

    try:
        os.makedirs(out_dir, exist_ok=True)
        for name, frame in outputs.items():
            csv_path = os.path.join(out_dir, f"{name}.csv")
            json_path = os.path.join(out_dir, f"{name}.json")
            frame.to_csv(csv_path, index=False, lineterminator="\n")
            _write_json(frame, json_path)
            written += [csv_path, json_path]

        summary_csv = os.path.join(out_dir, "summary.csv")
        summary_txt = os.path.join(out_dir, "summary.txt")
        summary.to_csv(summary_csv, index=False, lineterminator="\n")
        with open(summary_txt, "w", encoding="utf-8") as file:
            file.write(summary_text(summary))
        written += [summary_csv, summary_txt]
    except OSError as e:
        raise SinkWriteError(f"Unable to write figure data to {out_dir}: {e}") from e

    Logger.info(f"Wrote {len(written)} files to {out_dir}")
    return written
