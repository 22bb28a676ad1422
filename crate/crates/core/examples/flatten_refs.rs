//! Inline every `$ref` of a small contract, including a self-referencing schema.

use automcp::flatten;
use serde_json::json;

fn main() {
    let doc = json!({
        "openapi": "3.0.3",
        "paths": {"/nodes": {"get": {"responses": {"200": {
            "description": "OK",
            "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Node"}}}
        }}}}},
        "components": {"schemas": {
            "Node": {
                "type": "object",
                "properties": {
                    "label": {"$ref": "#/components/schemas/Label"},
                    "children": {"type": "array", "items": {"$ref": "#/components/schemas/Node"}}
                }
            },
            "Label": {"type": "string", "maxLength": 40}
        }}
    });
    let flat = flatten(&doc).expect("local refs only");
    println!("{} references resolved, cycles at {:?}", flat.ref_count_resolved, flat.cycles_detected);
    let schema = &flat.tree["paths"]["/nodes"]["get"]["responses"]["200"]["content"]["application/json"]["schema"];
    println!("{}", serde_json::to_string_pretty(schema).unwrap());
}
