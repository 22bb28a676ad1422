use serde_json::json;

use super::*;
use crate::ingest::parse_document;

fn yaml(text: &str) -> RawDocument {
    parse_document(text, "spec.yaml").unwrap()
}

fn classes(findings: &[LintFinding]) -> Vec<FailureClass> {
    findings.iter().map(|f| f.class).collect()
}

const CLEAN: &str = "\
openapi: 3.0.3
info:
  title: Clean
  version: '1'
servers:
  - url: https://api.example.com/v1
components:
  securitySchemes:
    key:
      type: apiKey
      in: header
      name: X-Key
security:
  - key: []
paths:
  /items/{item_id}:
    get:
      operationId: getItem
      parameters:
        - name: item_id
          in: path
          required: true
          schema:
            type: integer
          example: 42
      responses:
        '200':
          description: ok
";

#[test]
fn clean_document_has_no_findings() {
    let findings = lint_document(&yaml(CLEAN), &Rules::default()).unwrap();
    assert!(findings.is_empty(), "{findings:?}");
    let out = fix_loop(&yaml(CLEAN), &Rules::default(), DEFAULT_FIX_CAP).unwrap();
    assert_eq!(out.report.iterations, 0);
    assert_eq!(out.document.text, CLEAN);
    assert!(out.diff.is_empty());
}

#[test]
fn token_url_derived_from_authorize_endpoint() {
    let text = "\
openapi: 3.0.0
info: {title: Hotel, version: '1'}
servers: [{url: 'https://api.example.com'}]
components:
  securitySchemes:
    oauth:
      type: oauth2
      flows:
        authorizationCode:
          authorizationUrl: https://id.example.com/connect/authorize
          scopes: {}
paths: {}
";
    let d = yaml(text);
    let findings = lint_document(&d, &Rules::default()).unwrap();
    assert_eq!(classes(&findings), vec![FailureClass::A]);
    let patch = findings[0].patch.as_ref().unwrap();
    assert_eq!(patch.edits[0].value, json!("https://id.example.com/connect/token"));
    assert_eq!(patch.loc_changed, 1);
    let out = fix_loop(&d, &Rules::default(), DEFAULT_FIX_CAP).unwrap();
    assert_eq!(out.report.iterations, 1);
    assert!(out.report.is_clean());
}

#[test]
fn undeclared_scheme_is_added() {
    let text = "\
openapi: 3.0.0
info: {title: X, version: '1'}
servers: [{url: 'https://api.example.com'}]
security:
  - bearerAuth: []
paths: {}
";
    let out = fix_loop(&yaml(text), &Rules::default(), DEFAULT_FIX_CAP).unwrap();
    assert_eq!(
        out.document.tree.pointer("/components/securitySchemes/bearerAuth"),
        Some(&json!({"type": "http", "scheme": "bearer"}))
    );
}

#[test]
fn relative_server_uses_rules() {
    let text = "\
openapi: 3.0.0
info: {title: ADP Workers, version: '1'}
servers:
  - url: '{{service-root}}'
paths: {}
";
    let d = yaml(text);
    let none = lint_document(&d, &Rules::default()).unwrap();
    assert_eq!(classes(&none), vec![FailureClass::B]);
    assert!(none[0].patch.is_none());
    let rules = Rules::parse(r#"{"ADP": {"base_url": "https://api.adp.com"}}"#).unwrap();
    let out = fix_loop(&d, &rules, DEFAULT_FIX_CAP).unwrap();
    assert!(out.document.text.contains("  - url: 'https://api.adp.com'\n"), "{}", out.document.text);
    assert_eq!(out.report.loc_changed_total, 2);
}

#[test]
fn server_variable_enum_gets_default() {
    let text = "\
openapi: 3.0.0
info: {title: X, version: '1'}
servers:
  - url: https://{region}.example.com
    variables:
      region:
        enum: [eu, us]
paths: {}
";
    let out = fix_loop(&yaml(text), &Rules::default(), DEFAULT_FIX_CAP).unwrap();
    assert_eq!(out.document.tree.pointer("/servers/0/variables/region/default"), Some(&json!("eu")));
}

#[test]
fn header_advisory_suggests_env_line() {
    let rules = Rules::parse(r#"{"^clean": {"X-Version": "7"}}"#).unwrap();
    let findings = lint_document(&yaml(CLEAN), &rules).unwrap();
    assert_eq!(classes(&findings), vec![FailureClass::C]);
    assert_eq!(findings[0].suggestion.as_deref(), Some(r#"EXTRA_HEADERS={"X-Version":"7"}"#));
    let out = fix_loop(&yaml(CLEAN), &rules, DEFAULT_FIX_CAP).unwrap();
    assert_eq!(out.report.iterations, 0);
    assert_eq!(out.report.suggestions().len(), 1);
}

#[test]
fn shared_id_parameter_is_fixed_once() {
    let text = "\
openapi: 3.0.0
info: {title: Forge, version: '1'}
servers: [{url: 'https://forge.example.com/api/v4'}]
components:
  parameters:
    ProjectId:
      name: id
      in: path
      required: true
      schema:
        type: integer
      example: group/project
paths:
  /projects/{id}:
    get:
      parameters:
        - $ref: '#/components/parameters/ProjectId'
      responses: {'200': {description: ok}}
  /projects/{id}/issues:
    get:
      parameters:
        - $ref: '#/components/parameters/ProjectId'
      responses: {'200': {description: ok}}
";
    let d = yaml(text);
    let findings = lint_document(&d, &Rules::default()).unwrap();
    assert_eq!(classes(&findings), vec![FailureClass::D]);
    assert_eq!(findings[0].location, "/components/parameters/ProjectId/schema/type");
    assert_eq!(findings[0].patch.as_ref().unwrap().loc_changed, 2);
}

#[test]
fn numeric_example_is_not_a_mismatch() {
    let findings = lint_document(&yaml(CLEAN), &Rules::default()).unwrap();
    assert!(findings.iter().all(|f| f.class != FailureClass::D));
}

#[test]
fn uncovered_siblings_copy_the_credential_parameter() {
    let text = "\
openapi: 3.0.0
info: {title: Routes, version: '1'}
servers: [{url: 'https://api.example.com'}]
components:
  securitySchemes:
    api_key:
      type: apiKey
      in: query
      name: api_key
paths:
  /v2/a:
    get:
      parameters:
        - {name: api_key, in: query, required: true, schema: {type: string}}
      responses: {'200': {description: ok}}
  /v2/b:
    get:
      responses: {'200': {description: ok}}
  /v2/c:
    post:
      parameters:
        - {name: q, in: query, schema: {type: string}}
      responses: {'200': {description: ok}}
  /v2/d:
    get:
      security: []
      responses: {'200': {description: ok}}
  /other:
    get:
      responses: {'200': {description: ok}}
";
    let d = yaml(text);
    let findings = lint_document(&d, &Rules::default()).unwrap();
    let locations: Vec<&str> = findings.iter().map(|f| f.location.as_str()).collect();
    assert_eq!(locations, vec!["/paths/~1v2~1b/get", "/paths/~1v2~1c/post"]);
    let out = fix_loop(&d, &Rules::default(), DEFAULT_FIX_CAP).unwrap();
    assert!(out.report.is_clean());
    assert_eq!(
        out.document.tree.pointer("/paths/~1v2~1c/post/parameters/0/name"),
        Some(&json!("api_key"))
    );
    assert_eq!(out.report.findings[&FailureClass::E].len(), 2);
}

#[test]
fn swagger_implicit_becomes_access_code() {
    let text = "\
swagger: '2.0'
info: {title: Old, version: '1'}
host: api.example.com
securityDefinitions:
  oauth:
    type: oauth2
    flow: implicit
    authorizationUrl: https://api.example.com/oauth/authorize
    scopes: {}
paths: {}
";
    let out = fix_loop(&yaml(text), &Rules::default(), DEFAULT_FIX_CAP).unwrap();
    let scheme = out.document.tree.pointer("/securityDefinitions/oauth").unwrap();
    assert_eq!(scheme["flow"], "accessCode");
    assert_eq!(scheme["tokenUrl"], "https://api.example.com/oauth/token");
}

#[test]
fn json_documents_keep_their_layout() {
    let text = "{\n  \"openapi\": \"3.0.0\",\n  \"info\": {\"title\": \"J\", \"version\": \"1\"},\n  \"servers\": [{\"url\": \"/api\"}],\n  \"paths\": {}\n}\n";
    let d = parse_document(text, "spec.json").unwrap();
    let rules = Rules::parse(r#"{"J": {"base_url": "https://j.example.com/api"}}"#).unwrap();
    let out = fix_loop(&d, &rules, DEFAULT_FIX_CAP).unwrap();
    assert_eq!(out.report.loc_changed_total, 2);
    assert!(out.document.text.contains("\"servers\": [{\"url\": \"https://j.example.com/api\"}],"));
}

#[test]
fn unpatchable_findings_stay_residual() {
    let text = "\
openapi: 3.0.0
info: {title: X, version: '1'}
servers: [{url: 'https://api.example.com'}]
components:
  securitySchemes:
    digest:
      type: http
      scheme: digest
paths: {}
";
    let out = fix_loop(&yaml(text), &Rules::default(), DEFAULT_FIX_CAP).unwrap();
    assert_eq!(out.report.iterations, 0);
    assert_eq!(classes(&out.report.residual), vec![FailureClass::A]);
}
