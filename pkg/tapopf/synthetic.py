"""Random connected networks and operating points for derivative checks."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from .case_model import BranchRecord, BusRecord, BusType, Case, CostRecord, GenRecord, InternalModel
from .variables import VariableVector

NB_RANGE = (2, 10)
X_RANGE = (0.05, 0.5)
R_RANGE = (0.0, 0.1)
B_RANGE = (0.0, 0.3)
TAU_RANGE = (0.9, 1.1)
THETA_RANGE = (-0.3, 0.3)


def random_case(rng: np.random.Generator, nb: int | None = None, adjustable_share: float = 0.6) -> Case:
    """Connected case of ``nb`` buses with random impedances, taps and limits.

    A random spanning tree keeps the network connected; a few extra
    branches (parallels included) are added on top. At least one branch
    is adjustable.
    """
    if nb is None:
        nb = int(rng.integers(NB_RANGE[0], NB_RANGE[1] + 1))
    if nb < 2:
        raise ValueError(f"a random case needs at least 2 buses, got {nb}")

    types = [BusType.REF] + [BusType(int(t)) for t in rng.choice([BusType.PQ, BusType.PV], size=nb - 1)]
    buses = tuple(
        BusRecord(
            bus_id=i + 1,
            bus_type=types[i],
            Pd=float(rng.uniform(0.0, 80.0)),
            Qd=float(rng.uniform(-10.0, 30.0)),
            Gs=float(rng.uniform(0.0, 5.0)),
            Bs=float(rng.uniform(-10.0, 10.0)),
            Vm=float(rng.uniform(0.95, 1.05)),
            Va=float(rng.uniform(-10.0, 10.0)),
            Vmin=0.9,
            Vmax=1.1,
        )
        for i in range(nb)
    )

    pairs = [(int(rng.integers(0, i)), i) for i in range(1, nb)]
    for _ in range(int(rng.integers(0, nb // 2 + 1))):
        a, b = rng.choice(nb, size=2, replace=False)
        pairs.append((int(a), int(b)))
    adjustable = rng.random(len(pairs)) < adjustable_share
    adjustable[int(rng.integers(0, len(pairs)))] = True

    branches = []
    for (a, b), adj in zip(pairs, adjustable):
        if rng.random() < 0.5:
            a, b = b, a
        tau = float(rng.uniform(*TAU_RANGE))
        theta = float(np.rad2deg(rng.uniform(*THETA_RANGE)))
        record = BranchRecord(
            fbus=a + 1,
            tbus=b + 1,
            r=float(rng.uniform(*R_RANGE)),
            x=float(rng.uniform(*X_RANGE)),
            b=float(rng.uniform(*B_RANGE)),
            tau=tau,
            theta=theta,
            tau_min=tau,
            tau_max=tau,
            theta_min=theta,
            theta_max=theta,
            imax=float(rng.uniform(0.5, 3.0)) if rng.random() < 0.7 else 0.0,
        )
        if adj:
            record = replace(
                record,
                adjustable=True,
                tau_min=TAU_RANGE[0],
                tau_max=TAU_RANGE[1],
                theta_min=float(np.rad2deg(THETA_RANGE[0])),
                theta_max=float(np.rad2deg(THETA_RANGE[1])),
            )
        branches.append(record)

    gen_buses = [i for i in range(nb) if types[i] is not BusType.PQ]
    gens = tuple(
        GenRecord(
            bus=i + 1,
            Pg=float(rng.uniform(0.0, 100.0)),
            Qg=float(rng.uniform(-20.0, 20.0)),
            Pmin=0.0,
            Pmax=200.0,
            Qmin=-100.0,
            Qmax=100.0,
        )
        for i in gen_buses
    )
    costs = tuple(
        CostRecord(
            c2=float(rng.uniform(0.0, 0.1)),
            c1=float(rng.uniform(5.0, 40.0)),
            c0=float(rng.uniform(0.0, 100.0)),
        )
        for _ in gens
    )
    return Case(100.0, buses, tuple(branches), gens, costs)


def random_point(rng: np.random.Generator, m: InternalModel) -> VariableVector:
    """Operating point with voltages, dispatch and taps spread over their usual ranges."""
    return VariableVector.from_model(m).with_values(
        Va=rng.uniform(-0.3, 0.3, m.nb),
        Vm=rng.uniform(0.9, 1.1, m.nb),
        Pg=rng.uniform(0.0, 2.0, m.ng),
        Qg=rng.uniform(-1.0, 1.0, m.ng),
        tau=rng.uniform(*TAU_RANGE, m.na),
        theta=rng.uniform(*THETA_RANGE, m.na),
    )


def random_complex(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


__all__ = ["random_case", "random_complex", "random_point"]
