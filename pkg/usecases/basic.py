"""
Пример расчета через API: релаксация диска FeGe диаметром 120 нм и классификация профиля m_3.
"""

from dmifilm.analysis import classify_skyrmion, readout_profile
from dmifilm.dynamics import MemorySink, SimConfig, evolve
from dmifilm.fem import constant_field
from dmifilm.mesh import generate_disk
from dmifilm.model import fege_params

params = fege_params(alpha=1.0)
mesh = generate_disk(params.length_to_dimensionless(120e-9), params.length_to_dimensionless(4.45e-9))

tau = params.time_to_dimensionless(1e-11)
config = SimConfig(tau=tau, t_end=params.time_to_dimensionless(1e-9), stop_vmax=1e-6)
result = evolve(mesh, constant_field(mesh, (0.0, 0.0, 1.0)), params, config, MemorySink())

skyrmion = classify_skyrmion(readout_profile(mesh, result.state.m, 201))
print(f"steps={result.state.step} stopped_by={result.stopped_by}")  # noqa: T201
print(f"energy={result.state.energy.total:.6f} classification={skyrmion.kind}")  # noqa: T201
