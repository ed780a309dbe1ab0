from typing import Optional

from config.logging_config import logger
from config.run_config import build_lattice, load_run_config, parse_run_config
from core.errors import ConfigError
from core.lattice import WaveVectorLattice, estimate_shape_constants
from scripts.common import EXIT_OK, command, output_path, write_report
from utils.validators import validate_resolution


@command
def cmd_estimate_constants(config_path: Optional[str] = None, n: Optional[int] = None,
                           samples: Optional[int] = None, seed: Optional[int] = None,
                           output_dir: Optional[str] = None) -> int:
    """Estimate the Agmon and trilinear shape constants on the configured lattice and save them."""
    cfg = load_run_config(config_path) if config_path else parse_run_config({})
    if n is not None:
        if not validate_resolution(n):
            raise ConfigError(f"resolution must be an even integer >= 4, got {n}", fields=["flow.n"])
        lattice = WaveVectorLattice(int(n), tuple(cfg.flow.periods))
    else:
        lattice = build_lattice(cfg)
    constants = estimate_shape_constants(
        lattice,
        samples if samples is not None else cfg.constants.samples,
        seed=cfg.seed if seed is None else seed,
    )
    data = constants.to_dict()
    data.update({"n": lattice.n, "periods": list(lattice.periods)})
    path = output_path(output_dir or cfg.output_dir, cfg.name, "_constants.json")
    write_report(data, path)
    logger.info(f"Shape constants: c1={constants.c1:.6g}, c2={constants.c2:.6g}, c3={constants.c3:.6g}")
    return EXIT_OK
