use axum::body::Body;
use axum::http::{Request, StatusCode};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use curvseg::lattice::{decode_image, decode_mask, encode_png_gray, load_image, SeedLabel};
use curvseg::service::{router, SeedSpec, ServiceConfig};
use curvseg::synthcorpus::{control_corpus, export_corpus, find_case};

async fn call(method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let app = router(ServiceConfig::default());
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => req
            .header("content-type", "application/json")
            .body(Body::from(v.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

fn json_of(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

fn png_b64(w: usize, h: usize, value: u8) -> String {
    B64.encode(encode_png_gray(w, h, &vec![value; w * h]).unwrap())
}

#[tokio::test]
async fn bar_case_with_default_seeds_is_complete() {
    let (status, body) = call("POST", "/api/segment", Some(json!({ "image": "bar" }))).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let v = json_of(&body);
    assert_eq!(v["stats"]["unlabeled_count"], 0);
    for key in ["energy", "lower_bound", "runtime_ms"] {
        assert!(v["stats"][key].is_number(), "{key}");
    }
    assert_eq!(v["params"]["lambda"], 2.0);
    let mask = decode_mask(&B64.decode(v["mask"].as_str().unwrap()).unwrap()).unwrap();
    assert_eq!(mask, find_case("bar").unwrap().ground_truth);
}

#[tokio::test]
async fn scribbles_on_an_uploaded_png() {
    let mut bytes = vec![0u8; 20 * 12];
    for row in 0..12 {
        for col in 0..8 {
            bytes[row * 20 + col] = 230;
        }
    }
    let image = B64.encode(encode_png_gray(20, 12, &bytes).unwrap());
    let req = json!({
        "image": image,
        "seeds": {
            "brush_radius": 1.5,
            "points": [
                { "x": 2.0, "y": 6.0, "class": "fg" },
                { "x": 16.0, "y": 6.0, "class": "bg" }
            ]
        },
        "params": { "beta": 20.0, "probing": true }
    });
    let (status, body) = call("POST", "/api/segment", Some(req)).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let v = json_of(&body);
    assert_eq!((v["width"].as_u64(), v["height"].as_u64()), (Some(20), Some(12)));
    let mask = decode_mask(&B64.decode(v["mask"].as_str().unwrap()).unwrap()).unwrap();
    assert_eq!((mask.width(), mask.height()), (20, 12));
    for row in 0..12 {
        for col in 0..20 {
            assert_eq!(mask.get(row, col), col < 8, "pixel ({row}, {col})");
        }
    }
}

#[tokio::test]
async fn only_foreground_scribbles_are_rejected() {
    let req = json!({
        "image": png_b64(8, 8, 40),
        "seeds": { "brush_radius": 1.0, "points": [{ "x": 3.0, "y": 3.0, "class": "fg" }] }
    });
    let (status, body) = call("POST", "/api/segment", Some(req)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(json_of(&body)["error"], "both seed classes required");
}

#[tokio::test]
async fn malformed_bodies_are_rejected() {
    let app = router(ServiceConfig::default());
    let req = Request::builder()
        .method("POST")
        .uri("/api/segment")
        .header("content-type", "application/json")
        .body(Body::from("{not json"))
        .unwrap();
    assert_eq!(app.oneshot(req).await.unwrap().status(), StatusCode::BAD_REQUEST);

    let (status, _) = call("POST", "/api/segment", Some(json!({ "image": "%%%" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let out_of_bounds = json!({
        "image": png_b64(8, 8, 40),
        "seeds": { "points": [
            { "x": 3.0, "y": 3.0, "class": "fg" },
            { "x": 30.0, "y": 3.0, "class": "bg" }
        ] }
    });
    let (status, _) = call("POST", "/api/segment", Some(out_of_bounds)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let bad_params = json!({ "image": "bar", "params": { "lambda": -1.0 } });
    let (status, _) = call("POST", "/api/segment", Some(bad_params)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn oversized_images_get_413() {
    let req = json!({
        "image": png_b64(2048, 2048, 0),
        "seeds": { "points": [
            { "x": 1.0, "y": 1.0, "class": "fg" },
            { "x": 5.0, "y": 5.0, "class": "bg" }
        ] }
    });
    let (status, _) = call("POST", "/api/segment", Some(req)).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test]
async fn corpus_listing_and_lookup() {
    let (status, body) = call("GET", "/api/corpus", None).await;
    assert_eq!(status, StatusCode::OK);
    let names: Vec<String> = serde_json::from_slice(&body).unwrap();
    for want in ["bar", "dotted_circle", "circle_bump"] {
        assert!(names.iter().any(|n| n == want), "{want} missing");
    }

    let (status, _) = call("GET", "/api/corpus/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let dir = tempfile::tempdir().unwrap();
    export_corpus(&control_corpus(), dir.path()).unwrap();
    for name in &names {
        let (status, body) = call("GET", &format!("/api/corpus/{name}"), None).await;
        assert_eq!(status, StatusCode::OK);
        let v = json_of(&body);
        let image = decode_image(&B64.decode(v["image"].as_str().unwrap()).unwrap()).unwrap();
        let exported = load_image(dir.path().join(name).join("image.pgm")).unwrap();
        assert_eq!(image.to_bytes(), exported.to_bytes());
        assert_eq!((image.width(), image.height()), (exported.width(), exported.height()));

        let spec: SeedSpec = serde_json::from_value(v["seeds"].clone()).unwrap();
        let seeds = spec.rasterize(image.width(), image.height()).unwrap();
        assert_eq!(seeds, find_case(name).unwrap().seeds);
        assert!(seeds.count(SeedLabel::Foreground) > 0);
    }
}

#[tokio::test]
async fn run_length_seeds_round_trip_through_segment() {
    let (_, body) = call("GET", "/api/corpus/corner_90", None).await;
    let case = json_of(&body);
    let req = json!({ "image": case["image"], "seeds": case["seeds"] });
    let (status, body) = call("POST", "/api/segment", Some(req)).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let via_upload = json_of(&body)["mask"].clone();
    let (_, body) = call("POST", "/api/segment", Some(json!({ "image": "corner_90" }))).await;
    assert_eq!(json_of(&body)["mask"], via_upload);
}

#[tokio::test]
async fn parallel_identical_requests_agree() {
    let app = router(ServiceConfig {
        workers: 2,
        ..ServiceConfig::default()
    });
    let req = json!({ "image": "dotted_circle" }).to_string();
    let mut handles = Vec::new();
    for _ in 0..6 {
        let app = app.clone();
        let req = req.clone();
        handles.push(tokio::spawn(async move {
            let r = Request::builder()
                .method("POST")
                .uri("/api/segment")
                .header("content-type", "application/json")
                .body(Body::from(req))
                .unwrap();
            let resp = app.oneshot(r).await.unwrap();
            assert_eq!(resp.status(), StatusCode::OK);
            let body = resp.into_body().collect().await.unwrap().to_bytes();
            json_of(&body)["mask"].as_str().unwrap().to_string()
        }));
    }
    let mut masks = Vec::new();
    for h in handles {
        masks.push(h.await.unwrap());
    }
    assert!(masks.windows(2).all(|w| w[0] == w[1]));
}

#[tokio::test]
async fn root_serves_a_page() {
    let (status, body) = call("GET", "/", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(String::from_utf8_lossy(&body).contains("/api/segment"));

    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<p>bundle</p>").unwrap();
    let app = router(ServiceConfig {
        static_dir: Some(dir.path().to_path_buf()),
        ..ServiceConfig::default()
    });
    let resp = app
        .oneshot(Request::builder().uri("/").body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let body = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&body[..], b"<p>bundle</p>");
}
