"""Structure free-text aircraft maintenance logs into a two-level fault ontology,
aggregate the results, and evaluate classification quality."""

from .aggregation import (
    Distribution,
    PathwayMatrix,
    SankeyData,
    category_distribution,
    pathway_matrix,
    to_sankey,
    write_report,
)
from .backends import (
    AuthError,
    BackendError,
    BackendResult,
    CompletionBackend,
    CompletionParams,
    HttpBackend,
    ScriptedBackend,
)
from .evaluation import (
    ConfusionMatrix,
    Gazetteer,
    JudgeOutcome,
    JudgeScores,
    MetricsReport,
    SyntheticCorpus,
    aggregate_judgements,
    compare_systems,
    compute_metrics,
    confusion_matrix,
    default_gazetteer,
    generate_corpus,
    judge_event,
    rule_based_classify,
)
from .extraction import (
    ExtractionConfig,
    classify_action,
    extract_json_block,
    parse_structured_event,
    structure_corpus,
    structure_record,
)
from .ingestion import (
    AbbreviationDictionary,
    CleanRecord,
    ColumnMap,
    clean_text,
    load_records,
    normalize_abbreviations,
    prepare_record,
    prepare_records,
)
from .ontology import (
    ActionCategory,
    AnomalyReason,
    EventStatus,
    GoldLabel,
    MaintenanceRecord,
    Ontology,
    OntologyLeaf,
    StructuredEvent,
    canonicalize_category,
    default_ontology,
    load_ontology,
)
from .prompting import (
    Exemplar,
    PromptTemplate,
    build_extraction_prompt,
    build_judge_prompt,
    default_exemplars,
    default_template,
)

__version__ = "0.1.0"

__all__ = [
    "AbbreviationDictionary",
    "ActionCategory",
    "AnomalyReason",
    "AuthError",
    "BackendError",
    "BackendResult",
    "CleanRecord",
    "ColumnMap",
    "CompletionBackend",
    "CompletionParams",
    "ConfusionMatrix",
    "Distribution",
    "EventStatus",
    "Exemplar",
    "ExtractionConfig",
    "Gazetteer",
    "GoldLabel",
    "HttpBackend",
    "JudgeOutcome",
    "JudgeScores",
    "MaintenanceRecord",
    "MetricsReport",
    "Ontology",
    "OntologyLeaf",
    "PathwayMatrix",
    "PromptTemplate",
    "SankeyData",
    "ScriptedBackend",
    "StructuredEvent",
    "SyntheticCorpus",
    "aggregate_judgements",
    "build_extraction_prompt",
    "build_judge_prompt",
    "canonicalize_category",
    "category_distribution",
    "classify_action",
    "clean_text",
    "compare_systems",
    "compute_metrics",
    "confusion_matrix",
    "default_exemplars",
    "default_gazetteer",
    "default_ontology",
    "default_template",
    "extract_json_block",
    "generate_corpus",
    "judge_event",
    "load_ontology",
    "load_records",
    "normalize_abbreviations",
    "parse_structured_event",
    "pathway_matrix",
    "prepare_record",
    "prepare_records",
    "rule_based_classify",
    "structure_corpus",
    "structure_record",
    "to_sankey",
    "write_report",
]
