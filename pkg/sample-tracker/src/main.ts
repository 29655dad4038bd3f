/**
 * Static tracker over stdio: announces itself, then echoes the most recent
 * initialization region for every frame request until quit or end of input.
 *
 * The region travels as opaque text, so whatever the client sent at
 * initialization is reported back byte-for-byte. Protocol errors (malformed
 * lines, out-of-order requests) are fatal: diagnostic on stderr, exit 4.
 */

import { LineBuffer, ProtocolMessage, encodeLine, parseLine } from './wire.js';

const EXIT_PROTOCOL_ERROR = 4;

type SessionState = 'introduced' | 'waiting' | 'done';

let state: SessionState = 'introduced';
let lastRegion: string | null = null;

function send(line: string): void {
  process.stdout.write(line);
}

function die(reason: string): never {
  process.stderr.write(`sample-tracker: protocol error: ${reason}\n`);
  process.exit(EXIT_PROTOCOL_ERROR);
}

function answer(region: string): void {
  send(encodeLine('state', [region]));
  state = 'waiting';
}

function handleMessage(message: ProtocolMessage): void {
  if (state !== 'waiting') {
    die(`request in state ${state}`);
  }
  switch (message.type) {
    case 'initialize':
      lastRegion = message.args[1];
      answer(lastRegion);
      break;
    case 'frame':
      if (lastRegion === null) die('frame before initialize');
      answer(lastRegion);
      break;
    case 'quit':
      state = 'done';
      process.exit(0);
      break;
    default:
      die(`client may not send ${message.type}`);
  }
}

function handleLine(line: string): void {
  let parsed;
  try {
    parsed = parseLine(line);
  } catch (error) {
    die(`${(error as Error).message}`);
  }
  if (parsed.kind === 'message') {
    handleMessage(parsed.message);
  }
  // Passthrough on our own stdin is ignored.
}

function main(): void {
  // Free-form banner first: clients must tolerate arbitrary output
  // interleaved with protocol lines.
  send('sample-tracker: static tracker, standalone implementation\n');

  const params = new Map([
    ['trax.version', '1'],
    ['trax.name', 'sample-tracker'],
    ['trax.region', 'rectangle'],
    ['trax.image', 'path;memory'],
  ]);
  send(encodeLine('hello', [], params));
  state = 'waiting';

  const buffer = new LineBuffer();
  process.stdin.setEncoding('utf8');
  process.stdin.on('data', (chunk: string) => {
    for (const line of buffer.push(chunk)) handleLine(line);
  });
  process.stdin.on('end', () => {
    for (const line of buffer.flush()) handleLine(line);
    process.exit(0);
  });
}

main();
