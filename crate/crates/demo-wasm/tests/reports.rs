use liveface_demo::{register_face, registration_report, roc_curve, roc_report, texture_report};

#[test]
fn reports_are_deterministic() {
    assert_eq!(registration_report(9, 5).unwrap(), registration_report(9, 5).unwrap());
    assert_eq!(roc_report(1.0, 300, 2).unwrap(), roc_report(1.0, 300, 2).unwrap());
    assert_eq!(texture_report(4).unwrap(), texture_report(4).unwrap());
}

#[test]
fn exported_strings_are_json() {
    let reg: serde_json::Value = serde_json::from_str(&register_face(2, 0).unwrap()).unwrap();
    assert_eq!(reg["registered"].as_array().unwrap().len(), 68);
    let roc: serde_json::Value = serde_json::from_str(&roc_curve(2.0, 100, 1).unwrap()).unwrap();
    assert_eq!(roc["fpr"].as_array().unwrap().len(), roc["tpr"].as_array().unwrap().len());
}

#[test]
fn live_and_fake_crops_differ() {
    let r = texture_report(3).unwrap();
    let classes = r.as_array().unwrap();
    assert_eq!(classes[0]["label"], "live");
    assert_eq!(classes[1]["label"], "fake");
    assert_ne!(classes[0]["scales"][0]["histogram"], classes[1]["scales"][0]["histogram"]);
}

#[test]
fn all_outliers_still_returns_a_report() {
    let r = registration_report(1, 500).unwrap();
    assert_eq!(r["corrupted"].as_array().unwrap().len(), 68);
}
