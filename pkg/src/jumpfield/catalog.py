"""Built-in catalog: names, builders, and strict parameter schemas.

The CLI refuses configs that omit any physics parameter, so each entry
lists every parameter with its type; nothing is defaulted on the config
path.
"""

from __future__ import annotations

from . import asymptotics, gibbs, kernel, observables

KERNELS = {
    "gaussian": {
        "builder": kernel.gaussian_kernel,
        "params": {"width": "float", "center": "list[float]"},
    },
    "bump": {
        "builder": kernel.bump_kernel,
        "params": {"radius": "float", "height": "float"},
    },
    "power-law": {
        "builder": kernel.power_law_kernel,
        "params": {"alpha": "float", "scale": "float"},
    },
}

INTENSITIES = {
    "constant": {"builder": asymptotics.constant_intensity,
                 "params": {"c": "float"}},
    "step": {"builder": asymptotics.step_intensity,
             "params": {"z0": "float", "z1": "float"}},
    "sine": {"builder": asymptotics.sine_intensity,
             "params": {"base": "float", "amplitude": "float",
                        "frequency": "float"}},
    "dyadic-blocks": {"builder": asymptotics.dyadic_blocks_intensity,
                      "params": {}},
    "slow-oscillation": {"builder": asymptotics.slow_oscillation_intensity,
                         "params": {"z0": "float"}},
    "bump": {"builder": asymptotics.bump_intensity,
             "params": {"height": "float", "width": "float",
                        "center": "float"}},
    "power-decay": {"builder": asymptotics.power_decay_intensity,
                    "params": {"scale": "float", "exponent": "float"}},
    "constant+bump": {"builder": asymptotics.constant_plus_bump,
                      "params": {"c": "float", "height": "float",
                                 "width": "float", "center": "float"}},
}

POTENTIALS = {
    "hard-rods": {"builder": gibbs.hard_rods,
                  "params": {"radius": "float"}},
    "gaussian-repulsion": {"builder": gibbs.gaussian_repulsion,
                           "params": {"amplitude": "float",
                                      "width": "float"}},
}

TEST_FUNCTIONS = {
    "bump": {"builder": observables.smooth_bump,
             "params": {"radius": "float", "height": "float",
                        "center": "float"}},
    "cos2": {"builder": observables.cosine_taper,
             "params": {"radius": "float", "height": "float",
                        "center": "float"}},
}

SECTIONS = {
    "kernels": KERNELS,
    "intensities": INTENSITIES,
    "potentials": POTENTIALS,
    "test_functions": TEST_FUNCTIONS,
}


def describe(machine=False):
    if machine:
        return {section: {name: entry["params"]
                          for name, entry in entries.items()}
                for section, entries in SECTIONS.items()}
    lines = []
    for section, entries in SECTIONS.items():
        lines.append(f"{section}:")
        for name, entry in sorted(entries.items()):
            params = ", ".join(f"{k}: {v}"
                               for k, v in entry["params"].items())
            lines.append(f"  {name} ({params})" if params else f"  {name}")
    return "\n".join(lines)


def build_from_block(section, block, extra=None):
    """Instantiate a catalog object from a config block {name, params}."""
    entries = SECTIONS[section]
    name = block["name"]
    if name not in entries:
        raise KeyError(f"unknown {section[:-1]} '{name}'")
    entry = entries[name]
    params = dict(block.get("params", {}))
    missing = set(entry["params"]) - set(params)
    if missing:
        raise KeyError(f"{section}.{name} missing params {sorted(missing)}")
    unknown = set(params) - set(entry["params"])
    if unknown:
        raise KeyError(f"{section}.{name} unknown params {sorted(unknown)}")
    if extra:
        params.update(extra)
    return entry["builder"](**params)
