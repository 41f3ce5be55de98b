# -*- coding: utf-8 -*-

# Copyright: (c) 2024, Cell-Free MEC Contributors
# GNU General Public License v3.0+ (see COPYING or
# https://www.gnu.org/licenses/gpl-3.0.txt)

"""
Validated configuration for simulations, offloading scenarios, solvers and campaigns.

Defaults reproduce the reference deployment: a 1 km x 1 km area served either by
100 four-antenna APs (cell-free) or by 4 hundred-antenna BSs (cellular), 20 users,
20 MHz bandwidth and 100 mW uplink power.
"""

from __future__ import annotations

import math

from pathlib import Path
from typing import Any, Literal, Optional, Tuple

import yaml

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from cellfree_mec.errors import ConfigurationError


Mode = Literal["cellfree", "cellular", "fullpower", "fullpower_cellular"]

ALL_MODES: Tuple[str, ...] = ("cellfree", "cellular", "fullpower", "fullpower_cellular")
CELLULAR_MODES = frozenset({"cellular", "fullpower_cellular"})


def dbm_to_watt(value_dbm: float) -> float:
    """Convert a power in dBm to W"""
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


class SimConfig(BaseModel):
    """Radio and topology parameters of one deployment"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    coverage_side: float = Field(1000.0, gt=0, description="side of the square area (m)")
    num_aps: int = Field(100, ge=1, description="L, number of APs (BSs in cellular mode)")
    antennas_per_ap: int = Field(4, ge=1, description="M, antennas per AP")
    num_users: int = Field(20, ge=1, description="K, single-antenna users")
    bandwidth: float = Field(20e6, gt=0, description="B (Hz)")
    noise_power: float = Field(dbm_to_watt(-94.0), gt=0, description="sigma^2 (W)")
    carrier_freq: float = Field(2e9, gt=0, description="carrier frequency (Hz)")
    tau_c: int = Field(200, ge=1)
    tau_p: int = Field(10, ge=1)
    tau_u: int = Field(190, ge=1)
    tau_d: int = Field(0, ge=0)
    p_max: float = Field(0.1, gt=0, description="maximum uplink power (W)")
    pilot_power: float = Field(0.1, gt=0, description="pilot power (W)")
    shadow_sigma: float = Field(4.0, ge=0, description="shadow fading std (dB)")
    asd_deg: float = Field(15.0, ge=0, description="angular standard deviation (deg)")
    pathloss_intercept: float = Field(-30.5, description="pathloss at 1 m (dB)")
    pathloss_slope: float = Field(36.7, gt=0, description="dB per decade of distance")
    min_distance: float = Field(1.0, gt=0, description="distance clamp (m)")
    antenna_budget: Optional[int] = Field(None, ge=1, description="required L*M if set")
    seed: int = Field(0, ge=0)
    mode: Mode = "cellfree"

    @model_validator(mode="after")
    def _check_frame(self) -> "SimConfig":
        if self.tau_p + self.tau_u + self.tau_d != self.tau_c:
            raise ValueError(
                f"tau_p + tau_u + tau_d = {self.tau_p + self.tau_u + self.tau_d} "
                f"must equal tau_c = {self.tau_c}"
            )
        if self.num_users > 2 * self.tau_p:
            raise ValueError(
                f"{self.num_users} users exceed the pilot reuse limit 2*tau_p = {2 * self.tau_p}"
            )
        if self.antenna_budget is not None:
            total = self.num_aps * self.antennas_per_ap
            if total != self.antenna_budget:
                raise ValueError(f"L*M = {total} differs from antenna_budget {self.antenna_budget}")
        return self

    @property
    def uplink_fraction(self) -> float:
        """Pre-log factor tau_u / tau_c of the uplink SE"""
        return self.tau_u / self.tau_c

    @property
    def asd(self) -> float:
        """Angular standard deviation in radians"""
        return math.radians(self.asd_deg)

    @property
    def is_cellular(self) -> bool:
        """Whether this deployment is the cellular benchmark"""
        return self.mode in CELLULAR_MODES


def _cellular_default() -> SimConfig:
    return SimConfig(num_aps=4, antennas_per_ap=100, mode="cellular")


class OffloadConfig(BaseModel):
    """Computational tasks, compute budgets, deadlines and fronthaul"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    cycles_per_bit: float = Field(50.0, gt=0, description="alpha, w_k = alpha * b_k")
    task_bits_min: int = Field(1_000_000, gt=0)
    task_bits_max: int = Field(10_000_000, gt=0)
    task_bits_step: int = Field(1_000_000, gt=0, description="granularity of b_k draws")
    cpu_budget: int = Field(100_000_000_000, gt=0, description="f^CPU (cycles/s)")
    ap_budget_min: int = Field(1_000_000_000, gt=0, description="lower end of f^AP_l")
    ap_budget_max: int = Field(10_000_000_000, gt=0, description="upper end of f^AP_l")
    fronthaul_capacity: float = Field(10e9, gt=0, description="C_FH (bit/s)")
    quantization_bits: int = Field(16, ge=1, description="xi")
    deadline: float = Field(0.5, gt=0, description="cell-free deadline L_k (s)")
    deadline_cellular: float = Field(0.7, gt=0, description="cellular deadline (s)")
    power_weight: float = Field(1.0, ge=0, description="varpi(K), W per bit/s/Hz")

    @model_validator(mode="after")
    def _check_ranges(self) -> "OffloadConfig":
        if self.task_bits_max < self.task_bits_min:
            raise ValueError("task_bits_max must not be below task_bits_min")
        if self.ap_budget_max < self.ap_budget_min:
            raise ValueError("ap_budget_max must not be below ap_budget_min")
        low = -(-self.task_bits_min // self.task_bits_step)
        if low * self.task_bits_step > self.task_bits_max:
            raise ValueError("no multiple of task_bits_step lies in the task size range")
        return self


class SolverConfig(BaseModel):
    """Tolerances of the SCA loop and of the inner barrier method"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    sca_tolerance: float = Field(1e-5, gt=0)
    sca_max_iter: int = Field(30, ge=1)
    newton_max_iter: int = Field(500, ge=1)
    centering_max_iter: int = Field(60, ge=1)
    barrier_mu: float = Field(10.0, gt=1)
    barrier_t0: float = Field(1.0, gt=0)
    gap_tolerance: float = Field(1e-8, gt=0)
    newton_tolerance: float = Field(1e-9, gt=0)
    armijo_alpha: float = Field(0.25, gt=0, lt=0.5)
    armijo_beta: float = Field(0.5, gt=0, lt=1)
    init_margin: float = Field(1e-6, gt=0)
    interior_scale: float = Field(0.99, gt=0, lt=1)
    latency_tolerance: float = Field(1e-6, gt=0)
    record_trace: bool = False


class CampaignConfig(BaseModel):
    """Monte Carlo campaign comparing cell-free and cellular deployments"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    cellfree: SimConfig = Field(default_factory=SimConfig)
    cellular: SimConfig = Field(default_factory=_cellular_default)
    offload: OffloadConfig = Field(default_factory=OffloadConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    snapshots: int = Field(200, ge=1)
    realizations: int = Field(10, ge=0, description="extra realizations for ergodic SE")
    modes: Tuple[Mode, ...] = ALL_MODES
    workers: int = Field(1, ge=1)
    output_dir: Path = Path("results")

    @field_validator("modes", mode="before")
    @classmethod
    def _expand_all(cls, value: Any) -> Any:
        if value == "all" or value == ["all"] or value == ("all",):
            return ALL_MODES
        if isinstance(value, str):
            return (value,)
        return value

    @model_validator(mode="after")
    def _check_shared_drop(self) -> "CampaignConfig":
        if not self.modes:
            raise ValueError("at least one mode is required")
        if self.cellfree.is_cellular:
            raise ValueError("the cellfree section must use a cell-free mode")
        if not self.cellular.is_cellular:
            raise ValueError("the cellular section must use a cellular mode")
        for key in ("num_users", "coverage_side", "seed", "bandwidth"):
            if getattr(self.cellfree, key) != getattr(self.cellular, key):
                raise ValueError(f"cellfree and cellular sections disagree on {key}")
        return self

    @property
    def seed(self) -> int:
        """Campaign seed shared by both deployments"""
        return self.cellfree.seed

    @property
    def num_users(self) -> int:
        """K"""
        return self.cellfree.num_users


def build_campaign_config(data: dict, overrides: Optional[dict] = None) -> CampaignConfig:
    """Validate a raw mapping (plus CLI overrides) into a CampaignConfig"""
    merged = dict(data)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value

    # seed applies to both deployments so that user drops are shared
    seed = merged.pop("seed", None)
    if seed is not None:
        for section in ("cellfree", "cellular"):
            sub = dict(merged.get(section) or {})
            sub["seed"] = seed
            merged[section] = sub
    cellular = merged.get("cellular")
    if cellular is not None:
        sub = {"num_aps": 4, "antennas_per_ap": 100, "mode": "cellular"}
        sub.update(cellular)
        merged["cellular"] = sub

    try:
        return CampaignConfig.model_validate(merged)
    except ValidationError as error:
        raise ConfigurationError(f"Invalid campaign configuration: {error}") from error


def load_campaign_config(path: Optional[Path] = None, overrides: Optional[dict] = None):
    """Load a YAML campaign configuration file"""
    data: Any = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as config_file:
                data = yaml.safe_load(config_file) or {}
        except yaml.YAMLError as error:
            raise ConfigurationError(f"Cannot parse config file {path}: {error}") from error
        if not isinstance(data, dict):
            raise ConfigurationError(f"Config file {path} must contain a mapping")
    return build_campaign_config(data, overrides)
