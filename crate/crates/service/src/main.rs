use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use grag_core::embedding::{embed_graph, EmbeddingStore};
use grag_core::eval::{read_cases, render_report, run_eval, ReportFormat};
use grag_core::graph::{load_graph_files, save_graph_files};
use grag_core::llm::{LlmClient, MockLlm};
use grag_core::pcst::{solve_approx, solve_exact, PcstError, PcstInstance};
use grag_crawler::{crawl, CrawlConfig, FixtureProvider, PageProvider, WebDriverConfig, WebDriverProvider};
use grag_service::api::{QueryRequest, RetrieveRequest};
use grag_service::{router, Service, ServiceConfig};
use serde_json::json;
use url::Url;

#[derive(Parser)]
#[command(name = "grag", version, about = "Graph-RAG over web application state-action graphs")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "SERVICE_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Crawl a site into a nodes file and an adjacency file.
    Crawl {
        /// Directory with a site.json manifest and HTML files.
        #[arg(long, conflicts_with = "webdriver")]
        fixtures: Option<PathBuf>,
        /// WebDriver endpoint for crawling a live application.
        #[arg(long, requires = "home")]
        webdriver: Option<String>,
        #[arg(long)]
        home: Option<String>,
        /// Defaults to the home URL's host.
        #[arg(long)]
        host: Option<String>,
        /// Session cookie set before crawling, as NAME=VALUE.
        #[arg(long)]
        cookie: Vec<String>,
        #[arg(long)]
        out_nodes: PathBuf,
        #[arg(long)]
        out_adj: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        max_pages: usize,
        #[arg(long)]
        strip_query: bool,
        #[arg(long)]
        graph_id: Option<String>,
    },
    /// Embed a graph into the cache directory.
    Embed {
        #[arg(long)]
        nodes: PathBuf,
        #[arg(long)]
        adj: PathBuf,
        #[arg(long)]
        cache_dir: PathBuf,
    },
    /// Print the retrieved subgraph for a question.
    Retrieve {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        question: String,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        current_node: Option<u64>,
    },
    /// Answer a question.
    Query {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        question: String,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        current_node: Option<u64>,
        /// Configured model backend.
        #[arg(long)]
        llm: Option<String>,
        /// Ask without graph context.
        #[arg(long)]
        bare: bool,
        /// Use a scripted mock model instead of the configured backends.
        #[arg(long)]
        mock_llm: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        graph_dir: Option<PathBuf>,
    },
    /// Compare bare and graph-grounded answers over a question file.
    Eval {
        /// JSON lines, one case per line.
        #[arg(long)]
        cases: PathBuf,
        #[arg(long)]
        graph_dir: PathBuf,
        /// `.json` writes JSON, anything else Markdown.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        mock_llm: Option<PathBuf>,
    },
    /// Solve a PCST instance given as JSON.
    PcstSolve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
    },
}

#[derive(clap::Args)]
struct GraphArgs {
    #[arg(long)]
    nodes: PathBuf,
    #[arg(long)]
    adj: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Auto,
    Exact,
    Approx,
}

type CliResult = Result<(), String>;

fn config(path: Option<&Path>) -> Result<ServiceConfig, String> {
    match path {
        Some(p) => ServiceConfig::from_file(p),
        None => Ok(ServiceConfig::default()),
    }
    .map_err(|e| e.to_string())
}

fn service(cfg: &ServiceConfig, mock: Option<&Path>) -> Result<Service, String> {
    let Some(script) = mock else {
        return Service::from_config(cfg).map_err(|e| e.to_string());
    };
    let embedder = cfg.build_embedder().map_err(|e| e.to_string())?;
    let llm: Arc<dyn LlmClient> = Arc::new(MockLlm::from_file(script).map_err(|e| e.to_string())?);
    let svc = Service::new(embedder, BTreeMap::from([("mock".to_string(), llm)]), "mock".into(), cfg.engine.clone())
        .with_cache(cfg.cache_dir.as_deref());
    if let Some(dir) = &cfg.graph_dir {
        svc.load_dir(dir).map_err(|e| e.message)?;
    }
    Ok(svc)
}

fn print_json(v: &impl serde::Serialize) -> CliResult {
    println!("{}", serde_json::to_string_pretty(v).map_err(|e| e.to_string())?);
    Ok(())
}

fn api_err(e: grag_service::api::ApiError) -> String {
    serde_json::to_string(&e).unwrap_or(e.message)
}

fn load_into(svc: &Service, g: &GraphArgs) -> Result<String, String> {
    let graph = load_graph_files(&g.nodes, &g.adj).map_err(|e| e.to_string())?;
    let id = graph.graph_id().to_string();
    svc.upload_graph(graph).map_err(api_err)?;
    Ok(id)
}

#[allow(clippy::too_many_arguments)]
fn run_crawl(
    fixtures: Option<PathBuf>,
    webdriver: Option<String>,
    home: Option<String>,
    host: Option<String>,
    cookies: Vec<String>,
    out_nodes: PathBuf,
    out_adj: PathBuf,
    max_pages: usize,
    strip_query: bool,
    graph_id: Option<String>,
) -> CliResult {
    let (provider, home, host): (Box<dyn PageProvider>, String, String) = match (fixtures, webdriver) {
        (Some(dir), _) => {
            let p = FixtureProvider::open(dir).map_err(|e| e.to_string())?;
            let home = home.unwrap_or_else(|| p.home_url());
            let host = host.unwrap_or_else(|| p.host().to_string());
            (Box::new(p), home, host)
        }
        (None, Some(endpoint)) => {
            let home = home.expect("clap requires --home");
            let url = Url::parse(&home).map_err(|e| format!("--home: {e}"))?;
            let host = match host {
                Some(h) => h,
                None => url.host_str().ok_or("--home has no host")?.to_string(),
            };
            let mut cfg = WebDriverConfig::new(endpoint);
            for c in cookies {
                let (k, v) = c.split_once('=').ok_or_else(|| format!("bad --cookie {c:?}"))?;
                cfg.cookies.push((k.to_string(), v.to_string()));
            }
            (Box::new(WebDriverProvider::connect(&cfg, &url).map_err(|e| e.to_string())?), home, host)
        }
        (None, None) => return Err("either --fixtures or --webdriver is required".into()),
    };
    let cfg = CrawlConfig {
        max_pages,
        strip_query,
        graph_id,
        ..CrawlConfig::new(home, host)
    };
    let report = crawl(provider.as_ref(), &cfg).map_err(|e| e.to_string())?;
    save_graph_files(&report.graph, &out_nodes, &out_adj).map_err(|e| e.to_string())?;
    print_json(&json!({
        "graph_id": report.graph.graph_id(),
        "nodes": report.graph.nodes().len(),
        "edges": report.graph.edges().len(),
        "truncated": report.truncated,
        "external_ignored": report.external_ignored,
        "failed_pages": report.failed_pages,
    }))
}

fn run(cli: Cli) -> CliResult {
    let cfg_path = cli.config.as_deref();
    match cli.command {
        Command::Crawl {
            fixtures,
            webdriver,
            home,
            host,
            cookie,
            out_nodes,
            out_adj,
            max_pages,
            strip_query,
            graph_id,
        } => run_crawl(fixtures, webdriver, home, host, cookie, out_nodes, out_adj, max_pages, strip_query, graph_id),
        Command::Embed { nodes, adj, cache_dir } => {
            let cfg = config(cfg_path)?;
            let embedder = cfg.build_embedder().map_err(|e| e.to_string())?;
            let graph = load_graph_files(&nodes, &adj).map_err(|e| e.to_string())?;
            let store = EmbeddingStore::new(&cache_dir);
            let ge = embed_graph(embedder.as_ref(), &graph, Some(&store), cfg.engine.edge_text).map_err(|e| e.to_string())?;
            print_json(&json!({
                "graph_id": ge.graph_id,
                "embedder": ge.embedder_id,
                "dim": ge.dim,
                "nodes": ge.node_vectors.len(),
                "edges": ge.edge_vectors.len(),
                "cache_file": store.path_for(graph.graph_id()),
            }))
        }
        Command::Retrieve {
            graph,
            question,
            k,
            current_node,
        } => {
            let svc = service(&config(cfg_path)?, None)?;
            let graph_id = load_into(&svc, &graph)?;
            let out = svc
                .retrieve(&RetrieveRequest {
                    graph_id,
                    question,
                    k,
                    current_node,
                })
                .map_err(api_err)?;
            print_json(&out)
        }
        Command::Query {
            graph,
            question,
            k,
            current_node,
            llm,
            bare,
            mock_llm,
        } => {
            let svc = service(&config(cfg_path)?, mock_llm.as_deref())?;
            let graph_id = load_into(&svc, &graph)?;
            let llm = if mock_llm.is_some() { None } else { llm };
            let out = svc
                .query(&QueryRequest {
                    graph_id,
                    question,
                    k,
                    current_node,
                    llm,
                    bare,
                })
                .map_err(api_err)?;
            print_json(&out)
        }
        Command::Serve { bind, graph_dir } => {
            let mut cfg = config(cfg_path)?;
            if let Some(b) = bind {
                cfg.bind = b;
            }
            if graph_dir.is_some() {
                cfg.graph_dir = graph_dir;
            }
            let svc = Arc::new(service(&cfg, None)?);
            serve(svc, &cfg.bind)
        }
        Command::Eval {
            cases,
            graph_dir,
            out,
            mock_llm,
        } => {
            let mut cfg = config(cfg_path)?;
            cfg.graph_dir = Some(graph_dir);
            let svc = service(&cfg, mock_llm.as_deref())?;
            let file = File::open(&cases).map_err(|e| format!("{}: {e}", cases.display()))?;
            let cases = read_cases(BufReader::new(file)).map_err(|e| e.to_string())?;
            let report = run_eval(svc.engine(), &svc.loaded(), &cases);
            let format = match out.extension().and_then(|e| e.to_str()) {
                Some("json") => ReportFormat::Json,
                _ => ReportFormat::Markdown,
            };
            std::fs::write(&out, render_report(&report, format)).map_err(|e| format!("{}: {e}", out.display()))?;
            print_json(&report.aggregates)
        }
        Command::PcstSolve { instance, mode } => {
            let text = std::fs::read_to_string(&instance).map_err(|e| format!("{}: {e}", instance.display()))?;
            let inst: PcstInstance = serde_json::from_str(&text).map_err(|e| e.to_string())?;
            let (solver, sol) = match mode {
                Mode::Exact => ("exact", solve_exact(&inst)),
                Mode::Approx => ("approx", solve_approx(&inst)),
                Mode::Auto => match solve_exact(&inst) {
                    Err(PcstError::TooLarge { .. }) => ("approx", solve_approx(&inst)),
                    r => ("exact", r),
                },
            };
            let sol = sol.map_err(|e| e.to_string())?;
            print_json(&json!({"solver": solver, "nodes": sol.nodes, "edges": sol.edges, "objective": sol.objective}))
        }
    }
}

fn serve(svc: Arc<Service>, bind: &str) -> CliResult {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind).await.map_err(|e| format!("{bind}: {e}"))?;
        tracing::info!(addr = %listener.local_addr().map_err(|e| e.to_string())?, "listening");
        axum::serve(listener, router(svc))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| e.to_string())
    })
}

fn init_logging(to_stdout: bool) {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into());
    let builder = tracing_subscriber::fmt().json().with_env_filter(filter);
    if to_stdout {
        builder.init();
    } else {
        builder.with_writer(std::io::stderr).init();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // Commands that print results keep stdout for them.
    init_logging(matches!(cli.command, Command::Serve { .. }));
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
