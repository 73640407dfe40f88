subcommand = {
    "simulate": "src.cli.simulate",
    "contours": "src.cli.contours",
    "expand": "src.cli.expand",
    "aggregates": "src.cli.aggregates",
    "freeenergy": "src.cli.freeenergy",
    "frequency": "src.cli.frequency",
    "interface": "src.cli.interface",
    "lltcheck": "src.cli.lltcheck",
    "validate": "src.cli.validate",
}

free_energy = {
    "exact": "src.tasks.free_energy.exact_free_energy",
    "mc": "src.tasks.free_energy.mc_free_energy",
}

validator = {
    "geom_balanced": "src.models.multiscale.validators.check_geom_balanced",
    "geom_large": "src.models.multiscale.validators.check_geom_large",
    "entropy": "src.models.multiscale.validators.check_entropy",
    "clusters_step_zero": "src.models.multiscale.validators.check_clusters_step_zero",
    "aggregate_bounds": "src.models.multiscale.validators.check_aggregate_bounds",
    "mayer_totals": "src.models.multiscale.validators.check_mayer_totals",
    "prob_bound": "src.models.multiscale.validators.check_prob_bound",
    "large_probability": "src.models.multiscale.validators.check_large_probability",
}

ensemble = {
    "random": "src.dataloaders.boundary.RandomBC",
    "constant": "src.dataloaders.boundary.ConstantBC",
    "dobrushin": "src.dataloaders.boundary.DobrushinBC",
    "strip": "src.dataloaders.boundary.StripBC",
    "frozen_corners": "src.dataloaders.boundary.FrozenCornersBC",
    "file": "src.dataloaders.boundary.FileBC",
}
