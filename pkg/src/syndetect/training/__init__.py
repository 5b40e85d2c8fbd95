from .config import DEFAULT_STAGE_EPOCHS, PREDECESSOR, STAGES, TrainHyperparams, linear_lr_factor
from .ema import Ema
from .stages import (
    GeneratorBundle,
    RunPaths,
    assemble_pipeline,
    code_hash,
    init_bundle,
    load_metric,
    load_quality,
    run_stage1_aux,
    run_stage1_egd,
    run_stage1_finetune,
    run_stage2_dis,
    run_stage3_dmm,
    write_manifest,
)

__all__ = [
    "DEFAULT_STAGE_EPOCHS",
    "PREDECESSOR",
    "STAGES",
    "TrainHyperparams",
    "linear_lr_factor",
    "Ema",
    "GeneratorBundle",
    "RunPaths",
    "assemble_pipeline",
    "code_hash",
    "init_bundle",
    "load_metric",
    "load_quality",
    "run_stage1_aux",
    "run_stage1_egd",
    "run_stage1_finetune",
    "run_stage2_dis",
    "run_stage3_dmm",
    "write_manifest",
]
