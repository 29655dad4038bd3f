/**
 * Wire codec, written against the published line grammar only:
 *
 *   line  := "@@TRAX:" type (SP token)* (SP param)*
 *   type  := "hello" | "initialize" | "frame" | "state" | "quit"
 *   param := key "=" token          key := [A-Za-z0-9_.]+
 *   token := bare | quoted
 *   bare  := 1*(any char except SP TAB LF CR '"' '\' '=')
 *   quoted:= '"' *(escaped | plain) '"'   escapes: \" and \\ only
 *
 * Lines without the prefix are passthrough. This file deliberately shares
 * no code with any other implementation of the protocol.
 */

export const PREFIX = '@@TRAX:';

export type MessageType = 'hello' | 'initialize' | 'frame' | 'state' | 'quit';

export const ARITY: Record<MessageType, number> = {
  hello: 0,
  initialize: 2,
  frame: 1,
  state: 1,
  quit: 0,
};

export interface ProtocolMessage {
  type: MessageType;
  args: string[];
  params: Map<string, string>;
}

export type Parsed =
  | { kind: 'message'; message: ProtocolMessage }
  | { kind: 'passthrough'; text: string };

export class WireError extends Error {}

const KEY_RE = /^[A-Za-z0-9_.]+$/;
const BARE_EXCLUDED = new Set([' ', '\t', '\r', '"', '\\', '=']);

function isType(name: string): name is MessageType {
  return Object.prototype.hasOwnProperty.call(ARITY, name);
}

export function escapeToken(value: string): string {
  if (value.includes('\n')) {
    throw new WireError('newline in value');
  }
  let needsQuotes = value.length === 0;
  for (const ch of value) {
    if (BARE_EXCLUDED.has(ch)) {
      needsQuotes = true;
      break;
    }
  }
  if (!needsQuotes) return value;
  return '"' + value.replace(/\\/g, '\\\\').replace(/"/g, '\\"') + '"';
}

export function encodeLine(
  type: MessageType,
  args: string[] = [],
  params: Map<string, string> = new Map(),
): string {
  if (args.length !== ARITY[type]) {
    throw new WireError(`${type} takes ${ARITY[type]} argument(s)`);
  }
  const parts = [PREFIX + type];
  for (const arg of args) parts.push(escapeToken(arg));
  for (const [key, value] of params) {
    if (!KEY_RE.test(key)) throw new WireError(`bad key ${key}`);
    parts.push(`${key}=${escapeToken(value)}`);
  }
  return parts.join(' ') + '\n';
}

export function parseLine(line: string): Parsed {
  if (!line.startsWith(PREFIX)) {
    return { kind: 'passthrough', text: line };
  }
  const rest = line.slice(PREFIX.length);
  const space = rest.indexOf(' ');
  const name = space < 0 ? rest : rest.slice(0, space);
  if (!isType(name)) {
    throw new WireError(`unknown message type '${name}'`);
  }

  const args: string[] = [];
  const params = new Map<string, string>();
  let i = name.length;
  while (i < rest.length) {
    if (rest[i] !== ' ') throw new WireError(`expected separator at ${i}`);
    i += 1;
    if (i >= rest.length) throw new WireError('dangling separator');
    i = scanWord(rest, i, args, params);
  }

  if (args.length !== ARITY[name]) {
    throw new WireError(`${name} takes ${ARITY[name]} argument(s), got ${args.length}`);
  }
  return { kind: 'message', message: { type: name, args, params } };
}

function scanWord(
  s: string,
  start: number,
  args: string[],
  params: Map<string, string>,
): number {
  if (s[start] === '"') {
    const [text, next] = scanQuoted(s, start);
    if (next < s.length && s[next] !== ' ') {
      throw new WireError('junk after closing quote');
    }
    if (params.size > 0) throw new WireError('positional argument after parameters');
    args.push(text);
    return next;
  }

  let j = start;
  while (j < s.length && !BARE_EXCLUDED.has(s[j])) j += 1;

  if (j === s.length || s[j] === ' ') {
    if (j === start) throw new WireError('empty token');
    if (params.size > 0) throw new WireError('positional argument after parameters');
    args.push(s.slice(start, j));
    return j;
  }
  if (s[j] === '=') {
    const key = s.slice(start, j);
    if (!KEY_RE.test(key)) throw new WireError(`bad parameter key '${key}'`);
    const [value, next] = scanValue(s, j + 1);
    params.set(key, value);
    return next;
  }
  throw new WireError(`illegal character '${s[j]}' in bare token`);
}

function scanValue(s: string, start: number): [string, number] {
  if (start < s.length && s[start] === '"') {
    const [text, next] = scanQuoted(s, start);
    if (next < s.length && s[next] !== ' ') {
      throw new WireError('junk after closing quote');
    }
    return [text, next];
  }
  let j = start;
  while (j < s.length && !BARE_EXCLUDED.has(s[j])) j += 1;
  if (j < s.length && s[j] !== ' ') {
    throw new WireError(`illegal character '${s[j]}' in parameter value`);
  }
  if (j === start) throw new WireError('empty parameter value must be quoted');
  return [s.slice(start, j), j];
}

function scanQuoted(s: string, start: number): [string, number] {
  let out = '';
  let i = start + 1;
  while (i < s.length) {
    const ch = s[i];
    if (ch === '\\') {
      const next = s[i + 1];
      if (next !== '\\' && next !== '"') throw new WireError('bad escape');
      out += next;
      i += 2;
    } else if (ch === '"') {
      return [out, i + 1];
    } else {
      out += ch;
      i += 1;
    }
  }
  throw new WireError('unterminated quote');
}

/** Incremental LF splitter; strips a CR left behind by CRLF input. */
export class LineBuffer {
  private pending = '';

  push(chunk: string): string[] {
    this.pending += chunk;
    const lines: string[] = [];
    for (;;) {
      const nl = this.pending.indexOf('\n');
      if (nl < 0) break;
      let line = this.pending.slice(0, nl);
      if (line.endsWith('\r')) line = line.slice(0, -1);
      lines.push(line);
      this.pending = this.pending.slice(nl + 1);
    }
    return lines;
  }

  flush(): string[] {
    if (this.pending === '') return [];
    const tail = this.pending;
    this.pending = '';
    return [tail];
  }
}
