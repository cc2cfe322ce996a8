from .cpu import CpuSample, CpuSeries, sample_cpu, write_cpu_csv
from .fidelity import FidelityResult, HandoverEvent, TraceReplayer, fidelity_run, handovers
from .harness import (
    DEFAULT_SIZES,
    BringUpRow,
    UpdateRow,
    bench_bringup,
    bench_updates,
    rows_from_reports_jsonl,
    summarize_updates,
    write_rows_csv,
    write_rows_jsonl,
    write_update_reports_jsonl,
)
from .presets import (
    AERZEN,
    OSNABRUECK,
    PRESETS,
    TRIUNFO,
    MeasurementPlan,
    ScenarioPreset,
    scenario_transatlantic,
    scenario_wetlinks,
    sized_scenario,
)
from .viz import CZML_SCHEMA, export_viz, write_viz
