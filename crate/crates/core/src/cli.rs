//! Command-line front end: `generate`, `serve`, `lint`, `sample` and `login`.
//!
//! Every flag can also be set through an `AUTOMCP_*` environment variable.
//! Under `serve`, stdout carries JSON-RPC only; all diagnostics go to stderr.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::doctor::{fix_loop, lint_document, FailureClass, FixError, FixOutcome, LintFinding, Rules, RulesError, DEFAULT_FIX_CAP};
use crate::envfile::{self, EnvStore};
use crate::harness::{sample, DEFAULT_THRESHOLD};
use crate::ident;
use crate::ingest::{load_document, Format, IngestError, RawDocument};
use crate::pipeline::{compile_document, Compiled};
use crate::runtime::{serve_stdio, Runtime, RuntimeConfig};
use crate::security::{
    acquire_oauth_token, oauth_companion_vars, request_client_credentials_token, Injection, OAuthError, OAuthGrant, OAuthLogin,
    SchemeKind, EXTRA_HEADERS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_FINDINGS: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "automcp", version, about = "Compile OpenAPI contracts into MCP servers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// tracing filter for stderr diagnostics
    #[arg(long, global = true, env = "AUTOMCP_LOG", default_value = "warn")]
    pub log: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write manifest, .env template and launch descriptor into an output directory
    Generate(GenerateArgs),
    /// Serve the compiled tools over stdio
    Serve(ServeArgs),
    /// Report contract defects, optionally repairing them
    Lint(LintArgs),
    /// Print the endpoints an evaluation run would exercise
    Sample(SampleArgs),
    /// Obtain an OAuth2 access token and store it in .env
    Login(LoginArgs),
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    /// OpenAPI 2.0/3.x document, JSON or YAML
    #[arg(long = "spec", env = "AUTOMCP_SPEC")]
    pub spec_path: PathBuf,
}

#[derive(Debug, Args)]
pub struct RulesArgs {
    /// vendor rules: JSON object keyed by API-title regex
    #[arg(long, env = "AUTOMCP_RULES")]
    pub rules: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long = "out", env = "AUTOMCP_OUT_DIR")]
    pub out_dir: PathBuf,
    /// repair the contract before compiling; the repaired copy is written to the output directory
    #[arg(long, env = "AUTOMCP_FIX")]
    pub fix: bool,
    #[command(flatten)]
    pub rules: RulesArgs,
    /// also write server_stub.json with the full compiled manifest
    #[arg(long, env = "AUTOMCP_EMIT_STUB")]
    pub emit_stub: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long = "env", env = "AUTOMCP_ENV", default_value = ".env")]
    pub env_path: PathBuf,
    /// upstream request timeout
    #[arg(long = "timeout", env = "AUTOMCP_TIMEOUT", default_value_t = 30)]
    pub timeout_seconds: u64,
}

#[derive(Debug, Args)]
pub struct LintArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, env = "AUTOMCP_FIX")]
    pub fix: bool,
    /// where the repaired spec and diff go (default: next to the spec)
    #[arg(long = "out", env = "AUTOMCP_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub rules: RulesArgs,
    #[arg(long, env = "AUTOMCP_FIX_CAP", default_value_t = DEFAULT_FIX_CAP)]
    pub cap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, env = "AUTOMCP_THRESHOLD", default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: usize,
    #[arg(long, value_enum, env = "AUTOMCP_FORMAT", default_value = "json")]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct LoginArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long = "env", env = "AUTOMCP_ENV", default_value = ".env")]
    pub env_path: PathBuf,
    /// scheme id to log in with (default: the only oauth2 scheme)
    #[arg(long, env = "AUTOMCP_SCHEME")]
    pub scheme: Option<String>,
    /// local callback port for the authorization-code flow
    #[arg(long, env = "AUTOMCP_PORT", default_value_t = 8765)]
    pub port: u16,
    /// falls back to the `<API>_CLIENT_ID` entry of the env file
    #[arg(long, env = "AUTOMCP_CLIENT_ID")]
    pub client_id: Option<String>,
    #[arg(long, env = "AUTOMCP_CLIENT_SECRET", hide_env_values = true)]
    pub client_secret: Option<String>,
    /// scopes to request, comma separated (default: every declared scope)
    #[arg(long, env = "AUTOMCP_SCOPES", value_delimiter = ',')]
    pub scopes: Option<Vec<String>>,
    /// seconds to wait for the browser callback
    #[arg(long = "timeout", env = "AUTOMCP_TIMEOUT", default_value_t = 300)]
    pub timeout_seconds: u64,
}

/// A failure that ends the command with a specific exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(EXIT_IO, format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        let code = match e {
            IngestError::Io { .. } => EXIT_IO,
            IngestError::Parse { .. } | IngestError::Dialect { .. } => EXIT_PARSE,
        };
        Self::new(code, e.to_string())
    }
}

impl From<RulesError> for CliError {
    fn from(e: RulesError) -> Self {
        let code = match e {
            RulesError::Io(_) => EXIT_IO,
            _ => EXIT_PARSE,
        };
        Self::new(code, e.to_string())
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    init_tracing(&cli.log);
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("automcp: cannot start async runtime: {e}");
            return EXIT_IO;
        }
    };
    match runtime.block_on(run(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("automcp: {e}");
            e.code
        }
    }
}

fn init_tracing(filter: &str) {
    let filter = tracing_subscriber::EnvFilter::try_new(filter).unwrap_or_else(|_| "warn".into());
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_target(false)
        .try_init();
}

pub async fn run(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Generate(a) => cmd_generate(a),
        Command::Serve(a) => cmd_serve(a).await,
        Command::Lint(a) => cmd_lint(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Login(a) => cmd_login(a).await,
    }
}

fn load_rules(args: &RulesArgs) -> Result<Rules, CliError> {
    match &args.rules {
        Some(p) => Ok(Rules::load(p)?),
        None => Ok(Rules::default()),
    }
}

fn print_finding(f: &LintFinding) {
    eprintln!("[{}] {}: {}", f.class, f.location, f.message);
    if let Some(s) = &f.suggestion {
        eprintln!("      suggestion: {s}");
    }
}

fn compile_or_report(raw: &RawDocument, rules: &Rules) -> Result<Compiled, CliError> {
    compile_document(raw).map_err(|e| {
        if let Ok(findings) = lint_document(raw, rules) {
            findings.iter().for_each(print_finding);
        }
        CliError::new(EXIT_VALIDATION, e.to_string())
    })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("in-memory serialization");
    text.push('\n');
    write(path, text)
}

fn stem_and_ext(raw: &RawDocument) -> (String, &'static str) {
    let stem = raw
        .source_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "spec".into());
    let ext = match raw.format {
        Format::Json => "json",
        Format::Yaml => "yaml",
    };
    (stem, ext)
}

/// Writes `<stem>.fixed.<ext>` and `<stem>.fix.diff` into `dir`; returns the repaired copy's path.
fn write_fix(dir: &Path, raw: &RawDocument, outcome: &FixOutcome) -> Result<PathBuf, CliError> {
    let (stem, ext) = stem_and_ext(raw);
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let fixed = dir.join(format!("{stem}.fixed.{ext}"));
    write(&fixed, &outcome.document.text)?;
    write(&dir.join(format!("{stem}.fix.diff")), &outcome.diff)?;
    Ok(fixed)
}

fn fix_error(e: FixError) -> CliError {
    match e {
        FixError::NonConvergence { ref remaining, .. } => {
            remaining.iter().for_each(print_finding);
            CliError::new(EXIT_FINDINGS, e.to_string())
        }
        FixError::Ref(_) | FixError::Pointer(_) => CliError::new(EXIT_VALIDATION, e.to_string()),
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<i32, CliError> {
    let original = load_document(&args.spec.spec_path)?;
    let rules = load_rules(&args.rules)?;
    let out = &args.out_dir;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;

    let mut spec_for_serve = absolute(&args.spec.spec_path);
    let mut extra_headers: Option<String> = None;
    let raw = if args.fix {
        let outcome = fix_loop(&original, &rules, DEFAULT_FIX_CAP).map_err(fix_error)?;
        outcome.report.residual.iter().for_each(print_finding);
        for s in outcome.report.suggestions() {
            eprintln!("suggestion: {s}");
            if let Some(v) = s.strip_prefix(&format!("{EXTRA_HEADERS}=")) {
                extra_headers = Some(v.to_string());
            }
        }
        if !outcome.diff.is_empty() {
            spec_for_serve = absolute(&write_fix(out, &original, &outcome)?);
            eprintln!("repaired {} lines; wrote {}", outcome.report.loc_changed_total, spec_for_serve.display());
        }
        outcome.document
    } else {
        original
    };

    let compiled = compile_or_report(&raw, &rules)?;
    for w in &compiled.warnings {
        eprintln!("warning: {w}");
    }
    let manifest = &compiled.manifest;
    write_json(&out.join("manifest.json"), &manifest.to_manifest_json())?;

    let env_path = out.join(".env");
    write_env(&env_path, &compiled.env_map.template, extra_headers.as_deref())?;

    let exe = std::env::current_exe()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|_| "automcp".into());
    let server_name = ident::snake_words(&manifest.api_title);
    let descriptor = json!({
        "mcpServers": {
            server_name: {
                "command": exe,
                "args": [
                    "serve",
                    "--spec", spec_for_serve.display().to_string(),
                    "--env", absolute(&env_path).display().to_string(),
                ],
            }
        }
    });
    write_json(&out.join("mcp_config.json"), &descriptor)?;

    let oauth: Vec<Value> = manifest
        .schemes
        .iter()
        .filter_map(|s| match &s.kind {
            SchemeKind::Oauth2 { flows } => {
                let access = compiled
                    .env_map
                    .bindings_for(&s.id)
                    .find(|b| b.injection == Injection::Oauth2AccessToken)?
                    .env_var
                    .clone();
                let companion = oauth_companion_vars(&access);
                Some(json!({
                    "scheme": s.id,
                    "grant": flows.grant,
                    "authorization_url": flows.authorization_url,
                    "token_url": flows.token_url,
                    "scopes": flows.scopes.keys().collect::<Vec<_>>(),
                    "redirect_uri": "http://127.0.0.1:8765/callback",
                    "access_token_var": access,
                    "refresh_token_var": companion.refresh_token,
                    "client_id_var": companion.client_id,
                    "client_secret_var": companion.client_secret,
                }))
            }
            _ => None,
        })
        .collect();
    if !oauth.is_empty() {
        write_json(&out.join("oauth_config.json"), &json!({ "flows": oauth }))?;
    }
    if args.emit_stub {
        let stub = json!({
            "format": "automcp.tool-manifest",
            "version": 1,
            "manifest": manifest,
        });
        write_json(&out.join("server_stub.json"), &stub)?;
    }
    eprintln!("{} tools for {} written to {}", manifest.tools.len(), manifest.api_title, out.display());
    Ok(EXIT_OK)
}

/// Writes the template, or adds only the missing variables to an existing `.env`.
fn write_env(path: &Path, template: &str, extra_headers: Option<&str>) -> Result<(), CliError> {
    let existing = match std::fs::read_to_string(path) {
        Ok(t) => Some(t),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(CliError::io(path, e)),
    };
    let text = match existing {
        None => template.to_string(),
        Some(current) => {
            let have = EnvStore::parse(&current);
            let wanted = EnvStore::parse(template);
            let missing: Vec<(&str, &str)> = wanted
                .iter()
                .filter(|(k, _)| have.get(k).is_none())
                .collect();
            envfile::upsert(&current, &missing)
        }
    };
    let text = match extra_headers {
        Some(v) if EnvStore::parse(&text).non_empty(EXTRA_HEADERS).is_none() => envfile::upsert(&text, &[(EXTRA_HEADERS, v)]),
        _ => text,
    };
    write(path, text)
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

async fn cmd_serve(args: ServeArgs) -> Result<i32, CliError> {
    let raw = load_document(&args.spec.spec_path)?;
    let compiled = compile_document(&raw).map_err(|e| CliError::new(EXIT_VALIDATION, e.to_string()))?;
    let names = compiled.env_map.variable_names();
    let env = EnvStore::load_with_process(&args.env_path, names.iter().map(String::as_str))
        .map_err(|e| CliError::io(&args.env_path, e))?;
    let config = RuntimeConfig {
        timeout: Duration::from_secs(args.timeout_seconds),
    };
    let runtime = Runtime::new(compiled.manifest, env, config).map_err(|e| CliError::new(EXIT_VALIDATION, e.to_string()))?;
    tracing::info!(tools = runtime.manifest().tools.len(), "serving on stdio");
    serve_stdio(Arc::new(runtime)).await.map_err(|e| CliError::new(EXIT_IO, format!("stdio: {e}")))?;
    Ok(EXIT_OK)
}

fn cmd_lint(args: LintArgs) -> Result<i32, CliError> {
    let raw = load_document(&args.spec.spec_path)?;
    let rules = load_rules(&args.rules)?;
    let mut stdout = std::io::stdout().lock();
    if !args.fix {
        let findings = lint_document(&raw, &rules).map_err(|e| CliError::new(EXIT_VALIDATION, e.to_string()))?;
        findings.iter().for_each(print_finding);
        eprintln!("{} findings", findings.len());
        let report = json!({ "findings": findings });
        writeln!(stdout, "{}", serde_json::to_string_pretty(&report).expect("serializable")).map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
        let blocking = findings.iter().any(|f| f.class != FailureClass::C);
        return Ok(if blocking { EXIT_FINDINGS } else { EXIT_OK });
    }
    let outcome = fix_loop(&raw, &rules, args.cap).map_err(fix_error)?;
    let report = &outcome.report;
    let patched: usize = report.findings.values().map(Vec::len).sum();
    eprintln!(
        "{patched} findings patched in {} iterations, {} lines changed",
        report.iterations, report.loc_changed_total
    );
    report.residual_advisories.iter().chain(&report.residual).for_each(print_finding);
    if !outcome.diff.is_empty() {
        let dir = match &args.out_dir {
            Some(d) => d.clone(),
            None => args.spec.spec_path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        let fixed = write_fix(&dir, &raw, &outcome)?;
        eprintln!("wrote {}", fixed.display());
        eprint!("{}", outcome.diff);
    }
    let json = json!({ "report": report, "suggestions": report.suggestions() });
    writeln!(stdout, "{}", serde_json::to_string_pretty(&json).expect("serializable")).map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
    Ok(if report.is_clean() { EXIT_OK } else { EXIT_FINDINGS })
}

fn cmd_sample(args: SampleArgs) -> Result<i32, CliError> {
    let raw = load_document(&args.spec.spec_path)?;
    let compiled = compile_document(&raw).map_err(|e| CliError::new(EXIT_VALIDATION, e.to_string()))?;
    let report = sample(&compiled.manifest, args.threshold);
    let text = match args.format {
        OutputFormat::Json => serde_json::to_string_pretty(&report).expect("serializable"),
        OutputFormat::Table => report.render_table(),
    };
    writeln!(std::io::stdout(), "{}", text.trim_end()).map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
    Ok(EXIT_OK)
}

async fn cmd_login(args: LoginArgs) -> Result<i32, CliError> {
    let raw = load_document(&args.spec.spec_path)?;
    let compiled = compile_document(&raw).map_err(|e| CliError::new(EXIT_VALIDATION, e.to_string()))?;
    let candidates: Vec<_> = compiled
        .schemes
        .iter()
        .filter(|s| matches!(s.kind, SchemeKind::Oauth2 { .. }))
        .filter(|s| args.scheme.as_deref().is_none_or(|id| id == s.id))
        .collect();
    let scheme = match candidates.as_slice() {
        [one] => *one,
        [] => return Err(CliError::new(EXIT_VALIDATION, "no matching oauth2 security scheme")),
        _ => return Err(CliError::new(EXIT_VALIDATION, "several oauth2 schemes; pick one with --scheme")),
    };
    let SchemeKind::Oauth2 { flows } = &scheme.kind else { unreachable!() };
    let access_var = compiled
        .env_map
        .bindings_for(&scheme.id)
        .find(|b| b.injection == Injection::Oauth2AccessToken)
        .map(|b| b.env_var.clone())
        .ok_or_else(|| CliError::new(EXIT_VALIDATION, "scheme has no access-token binding"))?;
    let companion = oauth_companion_vars(&access_var);
    let env = EnvStore::load(&args.env_path).map_err(|e| CliError::io(&args.env_path, e))?;
    let client_id = args
        .client_id
        .or_else(|| env.non_empty(&companion.client_id).map(str::to_string))
        .ok_or_else(|| CliError::new(EXIT_VALIDATION, format!("set --client-id or {}", companion.client_id)))?;
    let client_secret = args
        .client_secret
        .or_else(|| env.non_empty(&companion.client_secret).map(str::to_string))
        .unwrap_or_default();

    let oauth_err = |e: OAuthError| CliError::new(EXIT_VALIDATION, e.to_string());
    match flows.grant {
        OAuthGrant::AuthorizationCode => {
            let mut login = OAuthLogin::new(flows.clone(), access_var.clone(), args.env_path.clone());
            login.client_id = client_id;
            login.client_secret = client_secret;
            login.redirect_port = args.port;
            login.timeout = Duration::from_secs(args.timeout_seconds);
            login.scopes = args.scopes.clone();
            acquire_oauth_token(&login, |url| eprintln!("Open this URL to authorize:\n  {url}"))
                .await
                .map_err(oauth_err)?;
        }
        OAuthGrant::ClientCredentials => {
            let tokens = request_client_credentials_token(flows, &client_id, &client_secret, args.scopes.as_deref())
                .await
                .map_err(oauth_err)?;
            envfile::write_vars(&args.env_path, &[(access_var.as_str(), tokens.access_token.as_str())])
                .map_err(|e| CliError::io(&args.env_path, e))?;
        }
    }
    eprintln!("stored {access_var} in {}", args.env_path.display());
    Ok(EXIT_OK)
}
