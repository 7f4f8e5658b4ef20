#!/usr/bin/env node
// SMT-LIB 2 command-line front end for the z3 WebAssembly build.
// Usage: node z3cli.js [file.smt2]   (reads stdin when no file is given)
const { init } = require('z3-solver');
const fs = require('fs');

(async () => {
  const args = process.argv.slice(2);
  const fileArg = args.find((a) => !a.startsWith('-'));
  const text = fileArg ? fs.readFileSync(fileArg, 'utf8') : fs.readFileSync(0, 'utf8');
  const { Z3 } = await init();
  const cfg = Z3.mk_config();
  const ctx = Z3.mk_context(cfg);
  const out = await Z3.eval_smtlib2_string(ctx, text);
  const data = out.endsWith('\n') || out === '' ? out : out + '\n';
  // Exit only after stdout drains; a bare process.exit() truncates large
  // responses once the pipe buffer fills.
  process.stdout.write(data, () => process.exit(0));
})().catch((e) => {
  process.stderr.write(String((e && e.message) || e) + '\n', () => process.exit(1));
});
