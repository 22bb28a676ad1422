//! OAuth2 token acquisition: authorization-code login through a local callback
//! listener, and the direct client-credentials grant.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{Query, State};
use axum::response::Html;
use axum::routing::get;
use axum::Router;
use serde::Deserialize;
use thiserror::Error;
use tokio::sync::oneshot;
use url::Url;

use super::{oauth_companion_vars, OAuth2Flows, OAuthGrant};
use crate::doctor::FailureClass;
use crate::envfile;

#[derive(Debug, Error)]
pub enum OAuthError {
    #[error("OAuth2 flow is unusable: {reason}")]
    FlowUnusable { reason: String, class: FailureClass },
    #[error("token endpoint answered {status}: {body}")]
    Exchange { status: u16, body: String },
    #[error("authorization was denied: {0}")]
    Denied(String),
    #[error("no callback received within {0:?}")]
    Timeout(Duration),
    #[error("callback listener: {0}")]
    Listener(#[source] std::io::Error),
    #[error("writing token to .env: {0}")]
    EnvWrite(#[source] std::io::Error),
    #[error("token request failed: {0}")]
    Transport(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSet {
    pub access_token: String,
    pub refresh_token: Option<String>,
}

/// Settings for one interactive authorization-code login.
#[derive(Debug, Clone)]
pub struct OAuthLogin {
    pub flows: OAuth2Flows,
    pub client_id: String,
    pub client_secret: String,
    /// Port of the local callback listener; 0 picks a free one.
    pub redirect_port: u16,
    /// Scopes to request; `None` requests every declared scope.
    pub scopes: Option<Vec<String>>,
    pub timeout: Duration,
    pub env_path: PathBuf,
    /// Variable the access token is written to, e.g. `APALEO_ACCESS_TOKEN`.
    pub access_var: String,
}

impl OAuthLogin {
    pub fn new(flows: OAuth2Flows, access_var: impl Into<String>, env_path: impl Into<PathBuf>) -> Self {
        Self {
            flows,
            client_id: String::new(),
            client_secret: String::new(),
            redirect_port: 8765,
            scopes: None,
            timeout: Duration::from_secs(300),
            env_path: env_path.into(),
            access_var: access_var.into(),
        }
    }

    fn scope_param(&self) -> String {
        match &self.scopes {
            Some(s) => s.join(" "),
            None => self.flows.scopes.keys().cloned().collect::<Vec<_>>().join(" "),
        }
    }
}

#[derive(Debug, Deserialize)]
struct CallbackParams {
    code: Option<String>,
    state: Option<String>,
    error: Option<String>,
}

type CallbackSender = Arc<Mutex<Option<oneshot::Sender<Result<String, OAuthError>>>>>;

#[derive(Clone)]
struct CallbackState {
    expected_state: String,
    tx: CallbackSender,
}

async fn callback(State(st): State<CallbackState>, Query(params): Query<CallbackParams>) -> Html<&'static str> {
    let outcome = if let Some(err) = params.error {
        Err(OAuthError::Denied(err))
    } else if params.state.as_deref() != Some(st.expected_state.as_str()) {
        Err(OAuthError::Denied("state mismatch".into()))
    } else if let Some(code) = params.code {
        Ok(code)
    } else {
        Err(OAuthError::Denied("callback carried no code".into()))
    };
    let ok = outcome.is_ok();
    if let Some(tx) = st.tx.lock().expect("callback lock").take() {
        let _ = tx.send(outcome);
    }
    if ok {
        Html("<html><body>Login complete. You can close this window.</body></html>")
    } else {
        Html("<html><body>Login failed. Check the terminal.</body></html>")
    }
}

fn random_state() -> String {
    rand::random::<[u8; 16]>().iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs the authorization-code flow: listens for `/callback`, hands the
/// authorization URL to `on_authorize` (print it, open a browser), exchanges the
/// code and writes the token into the `.env` file.
pub async fn acquire_oauth_token<F>(login: &OAuthLogin, on_authorize: F) -> Result<TokenSet, OAuthError>
where
    F: FnOnce(&Url),
{
    if !login.flows.authorization_code_usable() {
        return Err(OAuthError::FlowUnusable {
            reason: "authorizationCode flow needs both authorizationUrl and tokenUrl".into(),
            class: FailureClass::A,
        });
    }
    let auth_url = login.flows.authorization_url.as_deref().unwrap_or_default();
    let token_url = login.flows.token_url.as_deref().unwrap_or_default();

    let listener = tokio::net::TcpListener::bind(("127.0.0.1", login.redirect_port))
        .await
        .map_err(OAuthError::Listener)?;
    let port = listener.local_addr().map_err(OAuthError::Listener)?.port();
    let redirect_uri = format!("http://127.0.0.1:{port}/callback");
    let state = random_state();

    let mut url = Url::parse(auth_url).map_err(|e| OAuthError::FlowUnusable {
        reason: format!("authorizationUrl: {e}"),
        class: FailureClass::A,
    })?;
    {
        let mut q = url.query_pairs_mut();
        q.append_pair("response_type", "code");
        q.append_pair("client_id", &login.client_id);
        q.append_pair("redirect_uri", &redirect_uri);
        let scope = login.scope_param();
        if !scope.is_empty() {
            q.append_pair("scope", &scope);
        }
        q.append_pair("state", &state);
    }

    let (tx, rx) = oneshot::channel();
    let app = Router::new().route("/callback", get(callback)).with_state(CallbackState {
        expected_state: state,
        tx: Arc::new(Mutex::new(Some(tx))),
    });
    let (stop_tx, stop_rx) = oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        let _ = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stop_rx.await;
            })
            .await;
    });

    on_authorize(&url);
    let received = tokio::time::timeout(login.timeout, rx).await;
    let _ = stop_tx.send(());
    let _ = server.await;

    let code = match received {
        Err(_) => return Err(OAuthError::Timeout(login.timeout)),
        Ok(Err(_)) => return Err(OAuthError::Denied("callback listener closed".into())),
        Ok(Ok(outcome)) => outcome?,
    };

    let tokens = token_request(
        token_url,
        &[
            ("grant_type", "authorization_code"),
            ("code", &code),
            ("redirect_uri", &redirect_uri),
            ("client_id", &login.client_id),
            ("client_secret", &login.client_secret),
        ],
    )
    .await?;
    persist(login, &tokens)?;
    Ok(tokens)
}

/// Client-credentials grant: a single POST to the token endpoint.
pub async fn request_client_credentials_token(
    flows: &OAuth2Flows,
    client_id: &str,
    client_secret: &str,
    scopes: Option<&[String]>,
) -> Result<TokenSet, OAuthError> {
    let token_url = match (flows.grant, flows.token_url.as_deref()) {
        (OAuthGrant::ClientCredentials, Some(u)) if !u.is_empty() => u,
        _ => {
            return Err(OAuthError::FlowUnusable {
                reason: "clientCredentials flow needs a tokenUrl".into(),
                class: FailureClass::A,
            })
        }
    };
    let scope = match scopes {
        Some(s) => s.join(" "),
        None => flows.scopes.keys().cloned().collect::<Vec<_>>().join(" "),
    };
    let mut form = vec![
        ("grant_type", "client_credentials"),
        ("client_id", client_id),
        ("client_secret", client_secret),
    ];
    if !scope.is_empty() {
        form.push(("scope", &scope));
    }
    token_request(token_url, &form).await
}

#[derive(Deserialize)]
struct TokenResponse {
    access_token: Option<String>,
    refresh_token: Option<String>,
}

async fn token_request(token_url: &str, form: &[(&str, &str)]) -> Result<TokenSet, OAuthError> {
    let response = reqwest::Client::new()
        .post(token_url)
        .form(form)
        .send()
        .await
        .map_err(|e| OAuthError::Transport(e.without_url().to_string()))?;
    let status = response.status();
    let body = response
        .text()
        .await
        .map_err(|e| OAuthError::Transport(e.without_url().to_string()))?;
    if !status.is_success() {
        return Err(OAuthError::Exchange {
            status: status.as_u16(),
            body,
        });
    }
    let parsed: TokenResponse = serde_json::from_str(&body).map_err(|_| OAuthError::Exchange {
        status: status.as_u16(),
        body: "token response is not JSON".into(),
    })?;
    match parsed.access_token {
        Some(access_token) if !access_token.is_empty() => Ok(TokenSet {
            access_token,
            refresh_token: parsed.refresh_token.filter(|t| !t.is_empty()),
        }),
        _ => Err(OAuthError::Exchange {
            status: status.as_u16(),
            body: "token response has no access_token".into(),
        }),
    }
}

fn persist(login: &OAuthLogin, tokens: &TokenSet) -> Result<(), OAuthError> {
    let companion = oauth_companion_vars(&login.access_var);
    let mut updates: Vec<(&str, &str)> = vec![(login.access_var.as_str(), tokens.access_token.as_str())];
    if let Some(refresh) = &tokens.refresh_token {
        updates.push((companion.refresh_token.as_str(), refresh.as_str()));
    }
    envfile::write_vars(&login.env_path, &updates).map_err(OAuthError::EnvWrite)
}
