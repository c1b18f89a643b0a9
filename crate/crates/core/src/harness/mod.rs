//! Orchestration, reporting and plotting.

mod config;
mod eval;
mod report;
mod svg;

pub use config::{CurationConfig, EvalConfig, UmapConfig};
pub use eval::{
    align, curate, evaluate, file_stem, reduced_file, render_saved_report, run_evaluation, scatter_file, write_outputs,
    write_plots, write_tables, EvaluationRun, ModelRun, SpaceResult, CURATED_FILE, GALLERY_FILE, REPORT_FILE, SPLIT_FILE,
};
pub use report::{
    aggregate_by_category, format_category_row, render_category_markdown, write_category_csv, write_per_model_csv,
    Artifacts, Category, CategoryRow, CategoryTable, DatasetSummary, EvaluationReport, KMeansEcho, KnnEcho,
    ModelMetrics, ParamsEcho, Space, UmapEcho,
};
pub use svg::{class_color, gallery_order, panel_title, render_gallery, render_scatter_svg, GalleryPanel};
