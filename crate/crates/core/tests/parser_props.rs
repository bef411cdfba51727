use proptest::prelude::*;
use scq_core::circuit::{append_parity_stage, build_ghz};
use scq_core::qasm::{parse, serialize};
use scq_core::{Circuit, Gate, Param, ScanSpec};

fn param(scanned: bool) -> BoxedStrategy<Param> {
    let lit = prop_oneof![
        -10.0f64..10.0,
        Just(std::f64::consts::PI),
        Just(-0.0),
        Just(1e-300),
        Just(123456.789e10),
    ]
    .prop_map(Param::Literal);
    if scanned {
        prop_oneof![
            lit,
            prop_oneof![-5.0f64..-1e-3, 1e-3f64..5.0, Just(-1.0)].prop_map(Param::scanned)
        ]
        .boxed()
    } else {
        lit.boxed()
    }
}

fn gate(n: usize, scanned: bool) -> BoxedStrategy<Gate> {
    let q = 0..n;
    let two = (0..n, 0..n).prop_filter("distinct operands", |(a, b)| a != b);
    let mut options: Vec<BoxedStrategy<Gate>> = vec![
        q.clone().prop_map(Gate::H).boxed(),
        q.clone().prop_map(Gate::X).boxed(),
        q.clone().prop_map(Gate::Y).boxed(),
        q.clone().prop_map(Gate::Z).boxed(),
        (q.clone(), param(scanned)).prop_map(|(q, p)| Gate::Rx(q, p)).boxed(),
        (q.clone(), param(scanned)).prop_map(|(q, p)| Gate::Ry(q, p)).boxed(),
        (q, param(scanned)).prop_map(|(q, p)| Gate::Rz(q, p)).boxed(),
    ];
    if n >= 2 {
        options.push(two.clone().prop_map(|(c, t)| Gate::Cnot { control: c, target: t }).boxed());
        options.push(two.prop_map(|(a, b)| Gate::Cz(a, b)).boxed());
    }
    prop::strategy::Union::new(options).boxed()
}

fn circuit() -> impl Strategy<Value = Circuit> {
    (1usize..=12, any::<bool>()).prop_flat_map(|(n, scanned)| {
        let scan = (-4.0f64..0.0, 0.0f64..4.0, 1usize..80).prop_map(|(a, b, k)| ScanSpec::linspace(a, b, k));
        (
            prop::collection::vec(gate(n, scanned), 0..30),
            prop::collection::btree_set(0..n, 1..=n),
            scan,
        )
            .prop_map(move |(gates, measured, scan)| {
                let mut c = Circuit::new(n);
                c.gates = gates;
                c.measure(&measured.into_iter().collect::<Vec<_>>());
                if scanned || c.has_scanned_params() {
                    c.with_scan(scan)
                } else {
                    c
                }
            })
    })
}

const VALID: &str = "qubits 4\nscan linspace -1 1 5\nh 1\ncnot 1 0\ncnot 1 2\nrz 3 s*-1\nrx 3 1.5\nmeasure 0 1 2 3";

fn malformed_line() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z]{3,8}( [0-9]{1,2}){0,3}".prop_filter("not a mnemonic", |s| {
            let w = s.split(' ').next().unwrap();
            !["qubits", "scan", "h", "x", "y", "z", "rx", "ry", "rz", "cnot", "cz", "measure"].contains(&w)
        }),
        (10usize..100).prop_map(|q| format!("x {q}")),
        Just("cnot 1".to_string()),
        Just("rx 0".to_string()),
        Just("rz 0 abc".to_string()),
        Just("cz 2 2".to_string()),
        Just("h 0 1".to_string()),
        Just("scan linspace 0 1 3".to_string()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn serialize_then_parse_is_identity(c in circuit()) {
        prop_assert!(c.invariant_violations().is_empty(), "{:?}", c.invariant_violations());
        let text = serialize(&c);
        let back = parse(&text);
        prop_assert_eq!(back.as_ref().ok(), Some(&c), "text:\n{}\nerrors: {:?}", text, back.as_ref().err());
    }

    #[test]
    fn parser_is_total(text in "\\PC{0,200}") {
        let _ = parse(&text);
    }

    #[test]
    fn parser_is_total_on_near_programs(lines in prop::collection::vec("(qubits|scan|h|x|rx|rz|cnot|cz|measure|linspace|s\\*)?( (-?[0-9]{1,3}(\\.[0-9]{0,3})?|s\\*-?[0-9]|nan|inf|1e999)){0,4}", 0..8)) {
        let _ = parse(&lines.join("\n"));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn one_bad_line_gives_one_error_at_that_line(bad in malformed_line(), at in 3usize..=7) {
        let mut lines: Vec<String> = VALID.lines().map(str::to_string).collect();
        // Insert before the trailing measure so "measure must be last" stays satisfied.
        let at = at.min(lines.len());
        lines.insert(at - 1, bad.clone());
        let errs = parse(&lines.join("\n")).unwrap_err();
        prop_assert_eq!(errs.len(), 1, "{:?} for {:?}", errs, bad);
        prop_assert_eq!(errs[0].line, at);
    }
}

#[test]
fn builder_circuits_round_trip() {
    for n in 1..=10 {
        for offset in 0..=10 - n {
            let g = build_ghz(n, offset, 10).unwrap();
            assert_eq!(parse(&serialize(&g)).unwrap(), g);
            let p = append_parity_stage(&g, ScanSpec::parity_default()).unwrap();
            assert_eq!(parse(&serialize(&p)).unwrap(), p);
        }
    }
}
